"""Hierarchical interaction models built on Chinese restaurant processes.

Interaction sets are modelled by the (stable) ICRP and organized into levels
of granularity by fragmentation and coagulation of random partitions.
"""

__version__ = "0.1.0"

from ._validation import DataError, DomainError, GuardError
from .fragcoag import (CoagAux, PDGMCoagulation, PDGMFragmentation, PdgmParams, coag_m,
                       duality_report, frag_m, icoag_m, ifrag_m)
from .interaction import (Composition, InteractionSet, ParentMap, inter, isomorphic,
                          parent_map, part_comp)
from .models import (HicrpParams, NuMeasure, phi_nu, sample_hicrp, sample_hollywood,
                     sample_icrp, sample_sicrp)
from .partition import CrpParams, Partition, crp_sample, log_eppf, restrict, samp

__all__ = [
    "CoagAux", "Composition", "CrpParams", "DataError", "DomainError", "GuardError",
    "HicrpParams", "InteractionSet", "NuMeasure", "PDGMCoagulation", "PDGMFragmentation",
    "ParentMap", "Partition", "PdgmParams", "coag_m", "crp_sample", "duality_report",
    "frag_m", "icoag_m", "ifrag_m", "inter", "isomorphic", "log_eppf", "parent_map",
    "part_comp", "phi_nu", "restrict", "samp", "sample_hicrp", "sample_hollywood",
    "sample_icrp", "sample_sicrp",
]
