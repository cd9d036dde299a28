# settings.py
import logging
import os

log = logging.getLogger(__name__)

# ==========================
# CONFIG
# ==========================

VERSION = "2026-10-17 (unilateral SPE certificates, exact bound sweep)"


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name, "").strip()
    if not raw:
        return default
    try:
        value = int(raw.replace("_", ""))
    except ValueError:
        log.warning("[CONFIG] %s=%r is not an integer; using %d", name, raw, default)
        return default
    if value < 1:
        log.warning("[CONFIG] %s=%r must be positive; using %d", name, raw, default)
        return default
    return value


BUDGET_PROFILES = _env_int("SIGCOMP_BUDGET_PROFILES", 10**6)        # Bell(G)^S seller profiles per search
BUDGET_ASSIGNMENTS = _env_int("SIGCOMP_BUDGET_ASSIGNMENTS", 10**7)  # S^B buyer assignments per subgame
SPE_BATCH_CELLS = _env_int("SIGCOMP_SPE_BATCH_CELLS", 1 << 22)     # array cells per vectorized SPE batch
MAX_ENUM_GOODS =_env_int("SIGCOMP_MAX_GOODS", 12)                  # Bell(12) is about 4.2M partitions
POSITIVE_DEMAND_RETRIES = _env_int("SIGCOMP_DEMAND_RETRIES", 32)    # row redraws before forcing an entry
SWEEP_WORKERS = _env_int("SIGCOMP_WORKERS", 1)

LOG_LEVEL = os.getenv("SIGCOMP_LOG_LEVEL", "WARNING").strip().upper() or "WARNING"

CERTIFICATE_FORMAT = "sigcomp-spe-certificate/1"
