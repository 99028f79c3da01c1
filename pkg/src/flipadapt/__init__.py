"""Link adaptation for semantic communication over trained bit-flip channels.

Encoders and decoders are trained through parallel binary symmetric
channels whose flip probabilities are learned.  At transmission time the
allocator picks per-symbol QAM levels and powers so that realised bit
error rates match those probabilities.
"""

__version__ = "0.1.0"
