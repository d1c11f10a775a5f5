"""exobench: a software twin of a soft shoulder-exosuit experimental rig.

Subpackages cover the pneumatic plant and bang-bang pressure controller,
the telemetry bus with bit-exact record/replay, IMU joint kinematics, the
sEMG activation/fatigue pipeline, nonparametric repeated-measures
statistics, comfort-map and questionnaire scoring, and the trial protocol
runner that ties them together.
"""

__version__ = "0.1.0"
