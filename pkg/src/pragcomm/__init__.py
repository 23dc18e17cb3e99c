"""Task-oriented compression and redundancy-aware messaging for
multi-agent grid perception.

The package has two halves that check each other:

* a theory half (:mod:`pragcomm.infotheory`, :mod:`pragcomm.bayes_risk`,
  :mod:`pragcomm.rd_oracle`) computing exact quantities on small finite
  distributions, and
* a systems half (:mod:`pragcomm.vq`, :mod:`pragcomm.entropy_coder`,
  :mod:`pragcomm.mi_estimator`, :mod:`pragcomm.simworld`,
  :mod:`pragcomm.pipeline`) implementing the actual communication stack
  on synthetic perception worlds.

The CLI in :mod:`pragcomm.cli` wires config files to both halves.
"""

__version__ = "0.1.0"
