"""Exception hierarchy.

Every error carries a stable ``code`` string that the CLI writes into its
reports. ``certified_failure`` marks errors that are a mathematical verdict
(the input is provably outside the class we approximate) rather than a bug
or a bad configuration.
"""


class RungeKitError(Exception):
    code = "internal"
    certified_failure = False

    def __init__(self, message="", **details):
        super().__init__(message)
        self.details = details


# geometry
class EmptyShapeList(RungeKitError):
    code = "empty_shape_list"


class NonpositivePitch(RungeKitError):
    code = "nonpositive_pitch"


class MissingPoleInComponent(RungeKitError):
    code = "missing_pole_in_component"
    certified_failure = True

    def __init__(self, component, message=None, **details):
        super().__init__(message or f"no pole assigned to complement component {component}",
                         component=component, **details)
        self.component = component


class PoleInsideSet(RungeKitError):
    code = "pole_inside_set"


class DilationOverflow(RungeKitError):
    code = "dilation_overflow"


class WindingCheckFailed(RungeKitError):
    code = "winding_check_failed"


class PointOnCycle(RungeKitError):
    code = "point_on_cycle"


# rational expressions
class PoleHit(RungeKitError):
    code = "pole_hit"

    def __init__(self, variable, pole):
        super().__init__(f"variable {variable} hits pole {pole}", variable=variable, pole=pole)
        self.variable = variable
        self.pole = pole


class VariableCollisionInProduct(RungeKitError):
    code = "variable_collision"


class PoleConstraintViolated(RungeKitError):
    code = "pole_constraint_violated"


# oracle
class ExprSyntaxError(RungeKitError):
    code = "syntax_error"

    def __init__(self, message, position):
        super().__init__(f"{message} at offset {position}", position=position)
        self.position = position


class UnknownIdentifier(RungeKitError):
    code = "unknown_identifier"


class DimensionMismatch(RungeKitError):
    code = "dimension_mismatch"


class EvalSingularity(RungeKitError):
    code = "eval_singularity"

    def __init__(self, point, message="division by exact zero"):
        super().__init__(f"{message} at {point}", point=point)
        self.point = point


class BranchCutError(EvalSingularity):
    code = "branch_cut"


class PatchTooSmall(RungeKitError):
    code = "patch_too_small"


# runge1d
class RefinementLimitExceeded(RungeKitError):
    code = "refinement_limit_exceeded"


class CycleTooCloseToSet(RungeKitError):
    code = "cycle_too_close"


class PathNotFound(RungeKitError):
    code = "path_not_found"


class BudgetOverflow(RungeKitError):
    code = "budget_overflow"


# tensor
class TermBlowup(RungeKitError):
    code = "term_blowup"


class MarginTooSmall(RungeKitError):
    code = "margin_too_small"


class PullbackNotHolomorphic(RungeKitError):
    code = "pullback_not_holomorphic"
    certified_failure = True


class CertificationFailed(RungeKitError):
    code = "certification_failed"
    certified_failure = True


# unions
class NotDisjoint(RungeKitError):
    code = "not_disjoint"


class TransitivityViolated(RungeKitError):
    code = "transitivity_violated"


class SeparationTooTight(RungeKitError):
    code = "separation_too_tight"


class PreconditionViolated(RungeKitError):
    code = "precondition_violated"


class PointNotInBoundedComponent(RungeKitError):
    code = "point_not_in_bounded_component"


# io
class SceneError(RungeKitError):
    code = "scene_error"
