from .manager import KeyManager, derive_chain_key, export_seed_phrase, seed_to_scalar
from .session import KeyHandle, Session
