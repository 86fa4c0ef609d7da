from ._core import (
    Model,
    apply_artifact,
    binomial_fpr,
    bit_accuracy,
    decode,
    embed,
    extract,
    forge,
    gen_clean,
    init_model,
    jnd_map,
    load_model,
    psnr,
    remove,
    train,
)

__all__ = [
    "Model",
    "apply_artifact",
    "binomial_fpr",
    "bit_accuracy",
    "decode",
    "embed",
    "extract",
    "forge",
    "gen_clean",
    "init_model",
    "jnd_map",
    "load_model",
    "psnr",
    "remove",
    "train",
]
