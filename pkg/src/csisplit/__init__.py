"""Power-domain decomposition of CSI matrices into predictable
(RF-fingerprint) and unpredictable (secret-key) components, with the
separability, spatial-dependence and reciprocity metrics used to choose
the split."""

__version__ = "0.1.0"
