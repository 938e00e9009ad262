#pragma once

#include "specfence/encode/transition_system.hpp"

#include <cstddef>
#include <optional>

namespace specfence::logic
{

enum class ExplicitVerdict
{
    Safe,
    Unsafe,
    BudgetExceeded,
};

struct ExplicitResult
{
    ExplicitVerdict verdict = ExplicitVerdict::Safe;
    // Shortest execution to Bad over the full system, when Unsafe.
    std::optional< encode::Trace > trace;
    std::size_t states = 0;
};

struct ExplicitOptions
{
    std::size_t state_budget = std::size_t{ 1 } << 20;
};

// Breadth-first search over the concrete states of the cone of influence of
// Bad. Inputs are enumerated lazily: only those a step actually reads are
// split on.
ExplicitResult explicit_reachable( const encode::TransitionSystem& ts, const ExplicitOptions& options = {} );

// All successors of a state with the input vectors producing them. Inputs a
// step does not read are reported as zero.
std::vector< std::pair< encode::State, std::vector< std::uint64_t > > >
successors( const encode::TransitionSystem& ts, const encode::State& s );

} // namespace specfence::logic
