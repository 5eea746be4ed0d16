"""ExpressForge: tooling for eliciting and verifying robot arm expressions.

Phase 1 records keyframed expressions on a virtual 6-DoF arm under
counterbalanced referent prompts; phase 2 runs gated between-subjects surveys
over the coded expression set and computes understandability metrics.
"""

__version__ = "0.1.0"
