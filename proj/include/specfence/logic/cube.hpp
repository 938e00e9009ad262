#pragma once

#include "specfence/encode/transition_system.hpp"
#include "specfence/logic/term.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace specfence::logic
{

// Flat numbering of the bits of a list of word-level variables.
class BitLayout
{
    std::vector< unsigned > _widths;
    std::vector< std::uint32_t > _offsets;
    std::vector< std::uint32_t > _owner;

public:
    BitLayout() = default;
    explicit BitLayout( std::vector< unsigned > widths );

    [[nodiscard]] std::size_t num_vars() const { return _widths.size(); }
    [[nodiscard]] std::size_t num_bits() const { return _owner.size(); }
    [[nodiscard]] unsigned width( std::size_t var ) const { return _widths[ var ]; }
    [[nodiscard]] std::uint32_t offset( std::size_t var ) const { return _offsets[ var ]; }
    [[nodiscard]] std::size_t var_of( std::uint32_t bit ) const { return _owner[ bit ]; }
    [[nodiscard]] unsigned position( std::uint32_t bit ) const { return bit - _offsets[ _owner[ bit ] ]; }

    [[nodiscard]] bool bit_value( const encode::State& s, std::uint32_t bit ) const
    {
        return ( ( s[ var_of( bit ) ] >> position( bit ) ) & 1 ) != 0;
    }
};

BitLayout layout_of( const encode::TransitionSystem& ts );

struct BitLit
{
    std::uint32_t bit = 0;
    bool value = true;

    friend bool operator==( const BitLit&, const BitLit& ) = default;
    friend auto operator<=>( const BitLit&, const BitLit& ) = default;
};

// A conjunction of state-bit literals, sorted by bit, at most one per bit.
class Cube
{
    std::vector< BitLit > _lits;

public:
    Cube() = default;
    // Throws std::invalid_argument on a contradictory pair.
    explicit Cube( std::vector< BitLit > lits );

    [[nodiscard]] const std::vector< BitLit >& lits() const { return _lits; }
    [[nodiscard]] std::size_t size() const { return _lits.size(); }
    [[nodiscard]] bool empty() const { return _lits.empty(); }
    [[nodiscard]] bool contains( const BitLit& l ) const;
    // Every literal of this cube occurs in the other one.
    [[nodiscard]] bool subsumes( const Cube& other ) const;
    [[nodiscard]] Cube without( std::size_t i ) const;
    [[nodiscard]] bool holds( const encode::State& s, const BitLayout& layout ) const;
    // Is there a state with these fixed values inside the cube?
    [[nodiscard]] bool intersects( const std::vector< std::optional< std::uint64_t > >& fixed,
                                   const BitLayout& layout ) const;

    friend bool operator==( const Cube&, const Cube& ) = default;
    friend auto operator<=>( const Cube& a, const Cube& b ) { return a._lits <=> b._lits; }
};

// The cube holding exactly the given state.
Cube state_cube( const encode::State& s, const BitLayout& layout );

// Word-level terms for each variable of a layout.
struct CubeVocabulary
{
    BitLayout layout;
    std::vector< Term > current;
    std::vector< Term > primed;
};

CubeVocabulary vocabulary_of( const encode::TransitionSystem& ts );

Formula literal_formula( const BitLit& l, const BitLayout& layout, const std::vector< Term >& vars );
Formula cube_formula( const Cube& c, const BitLayout& layout, const std::vector< Term >& vars );
// The clause excluding the cube.
Formula lemma_formula( const Cube& c, const BitLayout& layout, const std::vector< Term >& vars );

// Word-level rendering such as "pc=3 & spec=1 & i[2]=0".
std::string render_cube( const Cube& c, const BitLayout& layout, const std::vector< std::string >& names );

class PreconditionError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// Drops literals one at a time, in repeated passes. try_block is given a
// candidate cube and returns the cube to continue with (the candidate or a
// subset of it) when the candidate is still blocked, or nothing.
Cube drop_literals( const Cube& c, const std::function< std::optional< Cube >( const Cube& ) >& try_block );

// Inductive generalization: a subset of c whose negation is still inductive
// relative to relative_to (relative_to & !c & trans -> !c') and excluded by
// init. Formulas use the variable indices of the vocabulary's terms.
Cube generalize( const Cube& c, const Formula& relative_to, const Formula& trans, const Formula& init,
                 const CubeVocabulary& vocab );

// Whether !c is inductive relative to relative_to and excluded by init.
bool blocks( const Cube& c, const Formula& relative_to, const Formula& trans, const Formula& init,
             const CubeVocabulary& vocab );

} // namespace specfence::logic
