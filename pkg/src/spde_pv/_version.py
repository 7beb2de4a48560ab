import hashlib
import json
from datetime import datetime, timezone

__version__ = "0.1.0"

VERSION_STRING = f"spde-pv-{__version__}"


def spec_hash(obj: dict) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()


def sidecar_metadata(spec_json: dict) -> dict:
    """Provenance block attached to every output file."""
    return {
        "version": VERSION_STRING,
        "spec_sha256": spec_hash(spec_json),
        "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
