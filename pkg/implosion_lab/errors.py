r''' errors.py - exception classes raised by the pipeline stages.'''


class ImplosionLabError(Exception):
    """ Base class for every failure raised by implosion_lab """
    pass


class InvalidConfig(ImplosionLabError):
    pass


class StageFailure(ImplosionLabError):
    """ Wraps a stage error with the name of the stage that raised it """

    def __init__(self, stage, error):
        self.stage = stage
        self.error = error
        super(StageFailure, self).__init__('stage {}: {}: {}'.format(stage, type(error).__name__, error))


# gas-core
class NonPositiveDensity(ImplosionLabError):
    pass


# guderley-profiles
class SonicDegenerate(ImplosionLabError):
    pass


class NoBracket(ImplosionLabError):
    pass


class MaxIterations(ImplosionLabError):
    pass


class SonicCrossingFailed(ImplosionLabError):
    pass


class OutOfRange(ImplosionLabError):
    pass


# rankine-hugoniot
class PreconditionViolated(ImplosionLabError):
    pass


# shock-trajectory
class QuadratureFailure(ImplosionLabError):
    pass


class ConstraintViolated(ImplosionLabError):
    pass


class DegenerateGap(ImplosionLabError):
    pass


class GapViolation(ImplosionLabError):
    pass


class RootOutOfBounds(ImplosionLabError):
    pass


# omega-minus
class MonitorViolated(ImplosionLabError):
    pass


class FixedPointStalled(ImplosionLabError):
    pass


class OutsideFan(ImplosionLabError):
    pass


# goursat-patch
class ContractionFailure(ImplosionLabError):
    pass


class InsufficientResolution(ImplosionLabError):
    pass


class FitIllConditioned(ImplosionLabError):
    pass


# regularization
class CoverageGap(ImplosionLabError):
    pass


class TrajectoryEscape(ImplosionLabError):
    pass


class JacobianNonPositive(ImplosionLabError):
    pass


# forward verification
class ForwardBlowup(ImplosionLabError):
    pass


class ShockDetectionAmbiguous(ImplosionLabError):
    pass
