#pragma once

#include "specfence/encode/transition_system.hpp"
#include "specfence/logic/check.hpp"

#include <optional>

namespace specfence::logic
{

struct BmcResult
{
    // Length in steps of the shortest execution reaching Bad, if found.
    std::optional< unsigned > depth;
    std::optional< encode::Trace > trace;
};

// Bounded model checking by unrolling the functional transition relation:
// each depth d asks whether Init(X0) & Bad(next^d(X0, I0..Id-1)) is
// satisfiable.
BmcResult bmc( const encode::TransitionSystem& ts, unsigned max_depth, const CheckOptions& options = {} );

} // namespace specfence::logic
