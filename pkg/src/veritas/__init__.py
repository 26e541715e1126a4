"""veritas: an independent safety-assessment engine for autonomous vehicles."""

from .catalog import Catalog, OddModel, TestDescription, TestDomain, check_coverage, load_catalog, validate_description
from .rating import Direction, MetricValue, Rating, References, classify, compare
from .selection import AutoFail, SelectionDecision, SelectionPolicy, missing_fraction, select_tests
from .session import Phase, Role, Session, advance, new_session, persist, restore
from .verdict import Advice, Outcome, apply_demerits, assess_test, fidelity_check, synthesize_advice

__version__ = "0.1.0"
