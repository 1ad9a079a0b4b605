"""Client/server protocol: messages, schedules, parties, traps, sessions."""
from .messages import (
    Codec,
    EncryptedStep,
    FinalRequest,
    FinalResult,
    MessageError,
    OutcomeReport,
    SetupMessage,
    Verdict,
    encode,
)
from .parties import (
    ClientBase,
    DirectClient,
    Fault,
    IndirectClient,
    ProtocolError,
    ServerState,
    Tamper,
    client_decode,
    client_setup,
    client_step,
    finalize,
    server_setup,
    server_step,
)
from .reduction import reduction_check, reduction_embed
from .session import (
    BranchResult,
    RestartBudgetExhausted,
    SessionRecord,
    explore,
    plain_distribution,
    run_session,
    total_variation,
    verify,
    verify_lines,
)
from .traps import TrapError, insert_traps, trap_verdict
from .transport import QueueTransport, TcpTransport, TransportError
