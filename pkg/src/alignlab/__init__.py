"""alignlab: a desk-scale testbed for position-robust representation losses
in waveform-enhancer fine-tuning."""

__version__ = "0.1.0"

from .data import UtterancePair, load_dataset, save_dataset, synth_pairs
from .encoder import EncoderConfig, RepSequence, encode, encode_backward, l2_normalize, positional_encoding
from .enhancer import EnhancerParams, enhance, enhance_backward, init_params, load_checkpoint, save_checkpoint
from .losses import (
    AlignmentWeights,
    LossOutput,
    SdtwTables,
    hard_dtw_oracle,
    mse_loss,
    sdtw_backward,
    sdtw_divergence,
    sdtw_forward,
    softmin,
    ssl_mse_pad_loss,
    ssl_softdtw_loss,
)
from .perturb import (
    PadPlan,
    pad_length,
    sample_pad_fraction,
    sample_speed_factor,
    speed_perturb,
    trim_frames,
    zero_pad,
)
from .signal import (
    FrameMatrix,
    Waveform,
    frame,
    mix_at_snr,
    read_wav,
    rms,
    si_snr,
    synth_noise,
    synth_speechlike,
    write_wav,
)
from .train import (
    AdamState,
    CheckpointRecord,
    NonFiniteLossError,
    RunMetrics,
    TrainConfig,
    adam_init,
    adam_step,
    clip_grad_norm,
    diagnose_positional,
    evaluate,
    train_objective,
)
