"""latentguess: password guessing on a learned latent representation.

Train a context autoencoder on a leak, then exploit latent locality for
conditional (template-biased) generation and dynamic, feedback-adaptive
guessing attacks. See the README for the CLI surface.
"""

from .charspace import (
    Alphabet,
    build_alphabet,
    context_noise,
    decode,
    encode,
    encode_template,
    matches,
    span_mask_noise,
)
from .cpg import CpgRequest, CpgResult, cpg_attack
from .cwae import (
    ModelConfig,
    ModelParams,
    TrainHyper,
    encode_latent,
    generate,
    init_model,
    load_checkpoint,
    mmd,
    save_checkpoint,
    train,
    train_step,
)
from .dpg import DpgConfig, DpgState, dpg_attack, sweep_dpg
from .harness import (
    BloomFilter,
    LeakDataset,
    build_biased_testsets,
    dedup_stream,
    derive_template,
    load_leak,
    split,
    static_attack,
    throughput_bench,
)
from .latent import (
    Mixture,
    Pivot,
    Prior,
    append_component,
    log_density,
    make_latent_distribution,
    sample,
)
from .trace import AttackTrace

__version__ = "0.1.0"
