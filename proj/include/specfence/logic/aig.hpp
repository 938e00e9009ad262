#pragma once

#include "specfence/logic/sat_solver.hpp"
#include "specfence/logic/term.hpp"

#include <cstdint>
#include <functional>
#include <unordered_map>
#include <vector>

namespace specfence::logic
{

// And-inverter graph literal: 2 * node + complement. Node 0 is constant false.
struct AigLit
{
    std::uint32_t x = 0;

    [[nodiscard]] constexpr std::uint32_t node() const { return x >> 1; }
    [[nodiscard]] constexpr bool complemented() const { return ( x & 1 ) != 0; }
    [[nodiscard]] constexpr AigLit operator~() const { return AigLit{ x ^ 1 }; }
    friend constexpr bool operator==( AigLit a, AigLit b ) = default;
};

constexpr AigLit aig_false{ 0 };
constexpr AigLit aig_true{ 1 };

// Structurally hashed AIG. Inputs are nodes without fanins.
class Aig
{
    struct Node
    {
        AigLit a;
        AigLit b;
        bool is_input;
    };

    std::vector< Node > _nodes;
    std::unordered_map< std::uint64_t, std::uint32_t > _strash;

public:
    Aig();

    AigLit make_input();
    AigLit make_and( AigLit a, AigLit b );
    AigLit make_or( AigLit a, AigLit b ) { return ~make_and( ~a, ~b ); }
    AigLit make_xor( AigLit a, AigLit b );
    AigLit make_xnor( AigLit a, AigLit b ) { return ~make_xor( a, b ); }
    AigLit make_ite( AigLit c, AigLit t, AigLit e );

    [[nodiscard]] std::size_t size() const { return _nodes.size(); }
    [[nodiscard]] bool is_input( std::uint32_t node ) const { return _nodes[ node ].is_input; }
    [[nodiscard]] bool is_and( std::uint32_t node ) const { return node != 0 && !_nodes[ node ].is_input; }
    [[nodiscard]] AigLit fanin0( std::uint32_t node ) const { return _nodes[ node ].a; }
    [[nodiscard]] AigLit fanin1( std::uint32_t node ) const { return _nodes[ node ].b; }
};

using BitVec = std::vector< AigLit >;

// Translates terms into AIG bit-vectors (least significant bit first).
// Variables are mapped through a callback so that callers decide which AIG
// inputs represent which variable bits.
class BitBlaster
{
public:
    using VarBits = std::function< BitVec( const TermNode& var ) >;

    BitBlaster( Aig& aig, VarBits var_bits );

    BitVec blast( const Term& t );
    AigLit blast_bool( const Formula& f );

private:
    Aig& _aig;
    VarBits _var_bits;
    std::unordered_map< const TermNode*, BitVec > _memo;
    // Keeps memoized nodes alive so their addresses are never reused.
    std::vector< Term > _pinned;

    BitVec blast_node( const Term& t, const std::vector< const BitVec* >& args );
    BitVec adder( const BitVec& a, const BitVec& b, AigLit carry_in );
    BitVec multiplier( const BitVec& a, const BitVec& b );
    AigLit less_than( const BitVec& a, const BitVec& b, bool or_equal );
    AigLit equal( const BitVec& a, const BitVec& b );
};

// Lazily emits Tseitin clauses for AIG cones into a SAT solver.
class CnfEmitter
{
    const Aig& _aig;
    sat::Solver& _solver;
    std::vector< sat::Var > _node_var;
    sat::Var _const_var = -1;

public:
    CnfEmitter( const Aig& aig, sat::Solver& solver );

    sat::Lit lit( AigLit l );
    // SAT variable of an already-emitted node, or -1.
    [[nodiscard]] sat::Var var_of_node( std::uint32_t node ) const;
};

} // namespace specfence::logic
