"""biznet: business-network inference and provenance engine.

Rebuilds a queryable network of participants, hosts and message flows from
fragmented multi-origin raw records, keeps field-level lineage down to every
source record, and supports continuous reloads, user enrichment, and
enhancement with write-back to the sources.
"""

from .config import EngineConfig, load_config
from .engine import Engine
from .keys import CompositeKey

__version__ = "0.1.0"

__all__ = ["CompositeKey", "Engine", "EngineConfig", "load_config", "__version__"]
