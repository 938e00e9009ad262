#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

namespace specfence::logic::sat
{

using Var = int;

// A literal is 2 * var + sign, sign = 1 meaning negated.
struct Lit
{
    int x = -2;

    static constexpr Lit make( Var v, bool negated = false ) { return Lit{ 2 * v + ( negated ? 1 : 0 ) }; }

    [[nodiscard]] constexpr Var var() const { return x >> 1; }
    [[nodiscard]] constexpr bool negated() const { return ( x & 1 ) != 0; }
    [[nodiscard]] constexpr Lit operator~() const { return Lit{ x ^ 1 }; }
    [[nodiscard]] constexpr int index() const { return x; }

    friend constexpr bool operator==( Lit a, Lit b ) = default;
    friend constexpr auto operator<=>( Lit a, Lit b ) = default;
};

constexpr Lit undef_lit{ -2 };

enum class Value : std::int8_t
{
    False = 0,
    True = 1,
    Undef = 2,
};

enum class Result
{
    Sat,
    Unsat,
    Unknown,
};

struct SolverStats
{
    std::uint64_t solves = 0;
    std::uint64_t conflicts = 0;
    std::uint64_t decisions = 0;
    std::uint64_t propagations = 0;
    std::uint64_t restarts = 0;
};

// Conflict-driven clause-learning solver: two-watched-literal propagation,
// first-UIP learning with clause minimization, VSIDS, phase saving, Luby
// restarts and activity-based learnt clause reduction. Incremental: clauses
// may be added between calls and each call may carry assumptions; after an
// unsatisfiable call under assumptions, failed_assumptions() returns the
// subset responsible.
class Solver
{
public:
    Solver();
    ~Solver();
    Solver( const Solver& ) = delete;
    Solver& operator=( const Solver& ) = delete;
    Solver( Solver&& ) noexcept;
    Solver& operator=( Solver&& ) noexcept;

    Var new_var();
    [[nodiscard]] int num_vars() const;
    [[nodiscard]] std::size_t num_clauses() const;

    // Returns false once the clause database is unsatisfiable at level 0.
    bool add_clause( std::span< const Lit > lits );
    bool add_clause( std::initializer_list< Lit > lits ) { return add_clause( std::span< const Lit >( lits.begin(), lits.size() ) ); }

    Result solve( std::span< const Lit > assumptions = {} );
    Result solve( std::initializer_list< Lit > assumptions )
    {
        return solve( std::span< const Lit >( assumptions.begin(), assumptions.size() ) );
    }

    // Valid after Sat.
    [[nodiscard]] Value model_value( Var v ) const;
    [[nodiscard]] bool model_true( Lit l ) const;

    // After Unsat under assumptions: the assumption literals that took part
    // in the final conflict (a subset of the assumptions).
    [[nodiscard]] const std::vector< Lit >& failed_assumptions() const;

    // Zero means unlimited. A call that exceeds the budget returns Unknown.
    void set_conflict_budget( std::uint64_t conflicts );
    // Seed 0 disables random decisions entirely.
    void set_seed( std::uint64_t seed );

    [[nodiscard]] const SolverStats& stats() const;
    [[nodiscard]] bool okay() const;

private:
    struct Impl;
    std::unique_ptr< Impl > _impl;
};

} // namespace specfence::logic::sat
