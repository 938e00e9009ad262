#pragma once

#include "specfence/logic/term.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>

namespace specfence::logic
{

class ResourceError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// Word-level assignment to the variables of a queried formula, keyed by
// variable index.
struct Model
{
    std::map< std::size_t, std::uint64_t > values;

    [[nodiscard]] std::uint64_t value( std::size_t index ) const;
    // Dense environment for evaluate(); unassigned slots are zero.
    [[nodiscard]] std::vector< std::uint64_t > environment( std::size_t size ) const;
};

struct CheckOptions
{
    // Zero means unlimited.
    std::uint64_t conflict_budget = 0;
    std::uint64_t seed = 0;
};

struct SatResult
{
    bool sat = false;
    Model model;
};

// Decides satisfiability by bit-blasting to CNF and running the CDCL solver.
// A Sat answer carries a total model over the formula's variables, and the
// model is re-checked by evaluation before it is returned.
SatResult check_sat( const Formula& f, const CheckOptions& options = {} );

} // namespace specfence::logic
