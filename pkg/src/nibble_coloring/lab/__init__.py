from nibble_coloring.lab.concentration import exact_tail, mahdian_exceptional_bound, verify_inequality
from nibble_coloring.lab.distance import convex_distance, verify_talagrand
from nibble_coloring.lab.space import ProductSpace, WitnessStructure
from nibble_coloring.lab.tools import chernoff_bound, kst_bound, lll_ok

__all__ = [
    "exact_tail",
    "mahdian_exceptional_bound",
    "verify_inequality",
    "convex_distance",
    "verify_talagrand",
    "ProductSpace",
    "WitnessStructure",
    "chernoff_bound",
    "kst_bound",
    "lll_ok",
]
