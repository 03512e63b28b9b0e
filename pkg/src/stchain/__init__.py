"""stchain: spin-1/2 Heisenberg chains probed through singlet-triplet measurements."""

from .analysis import (concurrence, fidelity, required_repeats, total_variation,
                       trace_distance)
from .eigen import (EigenPair, first_excited_singlet, full_spectrum, ground_state,
                    lowest_k_states, thermal_state, total_spin_sq)
from .errors import CapacityError, ConvergenceError, EnsembleError, SearchExhaustedError
from .hamiltonians import (ModelSpec, build_model, custom_model, matvec,
                           model_from_json, model_to_json, with_random_couplings,
                           with_random_fields)
from .noisekit import (DisorderConfig, EnsembleResult, ensemble_average, rng_stream,
                       sample_nuclear_fields, thermal_scan)
from .spinspace import (DensityOp, SpinBasis, StateVector, build_basis, load_state,
                        maximally_mixed, neel_state, partial_trace, save_state)
from .stmeasure import (PairingLayout, TripletProfile, bell_localize, binomial_profile,
                        herald_all_singlet, middle_layout, outcome_probability,
                        pairing_layout, singlet_pair_state, standard_layout,
                        triplet_profile, triplet_profile_bruteforce, werner_fraction)

__version__ = "0.1.0"
