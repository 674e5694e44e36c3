"""Firmware unpacking: signature scanning, entropy, extraction and trait detection."""
from .entropy import EncryptionVerdict, classify_encryption, shannon_entropy, window_entropies
from .extract import DEFAULT_MAX_DEPTH, FilesystemTree, LogEntry, TreeFile, extract, safe_member_path
from .signatures import CONTAINER_FORMATS, FILESYSTEM_FORMATS, MAGIC_TABLE, SignatureHit, scan_signatures
from .traits import FirmwareTraits, detect_traits, elf_architecture

__all__ = [
    "EncryptionVerdict", "classify_encryption", "shannon_entropy", "window_entropies",
    "DEFAULT_MAX_DEPTH", "FilesystemTree", "LogEntry", "TreeFile", "extract", "safe_member_path",
    "CONTAINER_FORMATS", "FILESYSTEM_FORMATS", "MAGIC_TABLE", "SignatureHit", "scan_signatures",
    "FirmwareTraits", "detect_traits", "elf_architecture",
]
