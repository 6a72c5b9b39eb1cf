from reslink.util import ConfigError

from .rescnn import ResCNNEncoder
from .transformer import TransformerEncoder

ENCODERS = {
    ResCNNEncoder.kind: ResCNNEncoder,
    TransformerEncoder.kind: TransformerEncoder,
}


def build_encoder(kind, config, vocab, embeddings=None, seed=0, lowercase=True):
    """
    Construct a freshly initialized encoder.

    :param kind: "rescnn" or "transformer".
    :param config: Model config of that kind.
    :param vocab: Vocab.
    :param embeddings: Optional pretrained table (ResCNN only).
    :param seed: Initialization seed.
    :param lowercase: Tokenizer case folding.
    """
    if kind not in ENCODERS:
        raise ConfigError("Unknown model kind {!r}, expected one of "
                          "{}".format(kind, ", ".join(sorted(ENCODERS))))
    if kind == ResCNNEncoder.kind:
        return ResCNNEncoder(config, vocab, embeddings=embeddings, seed=seed,
                             lowercase=lowercase)
    if embeddings is not None:
        raise ConfigError("Pretrained embeddings are only used by the rescnn "
                          "encoder")
    return TransformerEncoder(config, vocab, seed=seed, lowercase=lowercase)
