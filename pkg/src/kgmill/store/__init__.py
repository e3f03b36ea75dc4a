from kgmill.store.models import (
    Code,
    CodeSet,
    CustomTable,
    Finalization,
    ImportReport,
    ObjectKind,
    Run,
    RunStatus,
    TermString,
    Terminology,
    Triple,
)
from kgmill.store.repository import Store
from kgmill.store.export import export_hash, export_logical

__all__ = [
    "Code", "CodeSet", "CustomTable", "Finalization", "ImportReport",
    "ObjectKind", "Run", "RunStatus", "TermString", "Terminology", "Triple",
    "Store", "export_hash", "export_logical",
]
