#pragma once

#include <stdexcept>
#include <string>

namespace noir {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define NOIR_ERROR(Name)                                                   \
    class Name : public Error {                                            \
    public:                                                                \
        explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
    }

// network construction
NOIR_ERROR(AntiparallelEdge);
NOIR_ERROR(SelfLoop);
NOIR_ERROR(UnknownRoadId);
NOIR_ERROR(IsolatedRoad);
NOIR_ERROR(EmptyCycle);
NOIR_ERROR(PhaseEdgeNotAtJunction);

// dynamics / matrix validation
NOIR_ERROR(Property3Violation);
NOIR_ERROR(Property4Violation);
NOIR_ERROR(Property5Violation);
NOIR_ERROR(Property6Violation);
NOIR_ERROR(Property7Violation);
NOIR_ERROR(SplitNotNormalized);
NOIR_ERROR(NegativeInflow);
NOIR_ERROR(DensityOutOfRange);
NOIR_ERROR(PowerIterationNoConvergence);

// controller
NOIR_ERROR(InfeasibleAtCurrentState);
NOIR_ERROR(NoInletRoads);

// qp solver
NOIR_ERROR(NotPositiveDefinite);
NOIR_ERROR(QpInfeasible);
NOIR_ERROR(QpMaxIterations);

// harness
NOIR_ERROR(ParseError);
NOIR_ERROR(EmptyTrace);
NOIR_ERROR(IoError);

#undef NOIR_ERROR

} // namespace noir
