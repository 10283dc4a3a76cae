"""Two-stage prosody-latent speech synthesis at desk scale.

Stage one learns a sentence-level Gaussian over prosody from mel-spectrograms
with a variational reference encoder.  Stage two trains text-driven samplers
(semantic, syntax-graph, combined) to predict that Gaussian by closed-form KL
matching, plus a prosody-dependent duration model.  Everything runs on a small
numpy-backed reverse-mode autodiff core; no external ML framework.
"""

__version__ = "0.1.0"
