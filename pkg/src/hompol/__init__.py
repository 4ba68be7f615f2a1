"""hompol: Hong-Ou-Mandel polarization microscopy simulation and estimation.

Models a two-photon interferometer scanning a birefringent sample, generates
photon-counting data with losses, and recovers per-pixel fast-axis angles by
maximum likelihood with Cramér-Rao error bars.
"""

from .detection import CountTriple, LossModel, OutcomeProbabilities, outcome_probabilities, log_likelihood
from .hom import (DEFAULT_SPLITTER, InterferometerConfig, coincidence_indistinguishable,
                  coincidence_mixture, coincidence_probability, dip_curve, overlap_probability)
from .inference import (AngleEstimate, CalibrationResult, EstimateFlag, calibrate,
                        crb_variance, estimate_gamma, estimate_theta, fisher_information,
                        fisher_scan, visibility)
from .jones import (HORIZONTAL, VERTICAL, compose, effective_angle, horizontal_intensity,
                    linear_polarization, retarder, rotation)
from .montecarlo import RandomStream, TrialPlan, repeat_experiment, sample_counts
from .phantom import PhantomGrid, PixelTruth, Shard, generate_shards, load_phantom, save_phantom
from .scan import (DipFit, EstimateMap, ScanFrame, ScanPlan, acquire_frame, build_maps,
                   classical_reference, dip_position_study, expected_frame, fit_dip, run_scan)

__version__ = "0.1.0"
