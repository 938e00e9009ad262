#include "specfence/logic/aig.hpp"

#include <algorithm>
#include <cassert>
#include <stdexcept>

namespace specfence::logic
{

Aig::Aig() { _nodes.push_back( { aig_false, aig_false, false } ); }

AigLit Aig::make_input()
{
    _nodes.push_back( { aig_false, aig_false, true } );
    return AigLit{ static_cast< std::uint32_t >( ( _nodes.size() - 1 ) * 2 ) };
}

AigLit Aig::make_and( AigLit a, AigLit b )
{
    if ( a == aig_false || b == aig_false || a == ~b )
        return aig_false;
    if ( a == aig_true )
        return b;
    if ( b == aig_true || a == b )
        return a;
    if ( a.x > b.x )
        std::swap( a, b );
    const std::uint64_t key = ( static_cast< std::uint64_t >( a.x ) << 32 ) | b.x;
    if ( auto it = _strash.find( key ); it != _strash.end() )
        return AigLit{ it->second * 2 };
    _nodes.push_back( { a, b, false } );
    const auto node = static_cast< std::uint32_t >( _nodes.size() - 1 );
    _strash.emplace( key, node );
    return AigLit{ node * 2 };
}

AigLit Aig::make_xor( AigLit a, AigLit b )
{
    if ( a == aig_false )
        return b;
    if ( b == aig_false )
        return a;
    if ( a == aig_true )
        return ~b;
    if ( b == aig_true )
        return ~a;
    if ( a == b )
        return aig_false;
    if ( a == ~b )
        return aig_true;
    return make_or( make_and( a, ~b ), make_and( ~a, b ) );
}

AigLit Aig::make_ite( AigLit c, AigLit t, AigLit e )
{
    if ( c == aig_true || t == e )
        return t;
    if ( c == aig_false )
        return e;
    return make_or( make_and( c, t ), make_and( ~c, e ) );
}

BitBlaster::BitBlaster( Aig& aig, VarBits var_bits ) : _aig{ aig }, _var_bits{ std::move( var_bits ) } {}

AigLit BitBlaster::blast_bool( const Formula& f )
{
    if ( f.width() != 1 )
        throw TypeError( "blast_bool: formula must have width 1" );
    return blast( f )[ 0 ];
}

BitVec BitBlaster::blast( const Term& root )
{
    // Iterative post-order traversal.
    std::vector< std::pair< Term, bool > > stack{ { root, false } };
    std::vector< const BitVec* > args;
    while ( !stack.empty() )
    {
        auto [ t, expanded ] = stack.back();
        stack.pop_back();
        if ( _memo.contains( t.get() ) )
            continue;
        if ( !expanded && !t.args().empty() )
        {
            stack.emplace_back( t, true );
            for ( const auto& a : t.args() )
                if ( !_memo.contains( a.get() ) )
                    stack.emplace_back( a, false );
            continue;
        }
        args.clear();
        for ( const auto& a : t.args() )
            args.push_back( &_memo.at( a.get() ) );
        BitVec bits = blast_node( t, args );
        assert( bits.size() == t.width() );
        _memo.emplace( t.get(), std::move( bits ) );
        _pinned.push_back( t );
    }
    return _memo.at( root.get() );
}

BitVec BitBlaster::adder( const BitVec& a, const BitVec& b, AigLit carry )
{
    BitVec out( a.size() );
    for ( std::size_t i = 0; i < a.size(); ++i )
    {
        AigLit axb = _aig.make_xor( a[ i ], b[ i ] );
        out[ i ] = _aig.make_xor( axb, carry );
        carry = _aig.make_or( _aig.make_and( a[ i ], b[ i ] ), _aig.make_and( axb, carry ) );
    }
    return out;
}

BitVec BitBlaster::multiplier( const BitVec& a, const BitVec& b )
{
    const std::size_t w = a.size();
    BitVec acc( w, aig_false );
    for ( std::size_t i = 0; i < w; ++i )
    {
        if ( b[ i ] == aig_false )
            continue;
        BitVec partial( w, aig_false );
        for ( std::size_t j = 0; i + j < w; ++j )
            partial[ i + j ] = _aig.make_and( a[ j ], b[ i ] );
        acc = adder( acc, partial, aig_false );
    }
    return acc;
}

AigLit BitBlaster::less_than( const BitVec& a, const BitVec& b, bool or_equal )
{
    // Scan from the least significant bit: lt_i = (~a_i & b_i) | (a_i == b_i) & lt_{i-1}.
    AigLit lt = or_equal ? aig_true : aig_false;
    for ( std::size_t i = 0; i < a.size(); ++i )
    {
        AigLit strictly = _aig.make_and( ~a[ i ], b[ i ] );
        AigLit same = _aig.make_xnor( a[ i ], b[ i ] );
        lt = _aig.make_or( strictly, _aig.make_and( same, lt ) );
    }
    return lt;
}

AigLit BitBlaster::equal( const BitVec& a, const BitVec& b )
{
    AigLit acc = aig_true;
    for ( std::size_t i = 0; i < a.size(); ++i )
        acc = _aig.make_and( acc, _aig.make_xnor( a[ i ], b[ i ] ) );
    return acc;
}

BitVec BitBlaster::blast_node( const Term& t, const std::vector< const BitVec* >& args )
{
    const unsigned w = t.width();
    switch ( t.op() )
    {
    case Op::Const: {
        BitVec out( w );
        for ( unsigned i = 0; i < w; ++i )
            out[ i ] = ( ( t.const_value() >> i ) & 1 ) ? aig_true : aig_false;
        return out;
    }
    case Op::Var: {
        BitVec out = _var_bits( t.node() );
        if ( out.size() != w )
            throw std::logic_error( "bit-blaster: variable '" + t.node().name + "' mapped to wrong number of bits" );
        return out;
    }
    case Op::Not: {
        BitVec out( w );
        for ( unsigned i = 0; i < w; ++i )
            out[ i ] = ~( *args[ 0 ] )[ i ];
        return out;
    }
    case Op::And:
    case Op::Or:
    case Op::Xor: {
        BitVec out( w );
        for ( unsigned i = 0; i < w; ++i )
        {
            AigLit a = ( *args[ 0 ] )[ i ];
            AigLit b = ( *args[ 1 ] )[ i ];
            out[ i ] = t.op() == Op::And  ? _aig.make_and( a, b )
                       : t.op() == Op::Or ? _aig.make_or( a, b )
                                          : _aig.make_xor( a, b );
        }
        return out;
    }
    case Op::Add: return adder( *args[ 0 ], *args[ 1 ], aig_false );
    case Op::Sub: {
        BitVec nb( w );
        for ( unsigned i = 0; i < w; ++i )
            nb[ i ] = ~( *args[ 1 ] )[ i ];
        return adder( *args[ 0 ], nb, aig_true );
    }
    case Op::Mul: return multiplier( *args[ 0 ], *args[ 1 ] );
    case Op::Eq: return { equal( *args[ 0 ], *args[ 1 ] ) };
    case Op::Ult: return { less_than( *args[ 0 ], *args[ 1 ], false ) };
    case Op::Ule: return { less_than( *args[ 0 ], *args[ 1 ], true ) };
    case Op::Ite: {
        BitVec out( w );
        AigLit c = ( *args[ 0 ] )[ 0 ];
        for ( unsigned i = 0; i < w; ++i )
            out[ i ] = _aig.make_ite( c, ( *args[ 1 ] )[ i ], ( *args[ 2 ] )[ i ] );
        return out;
    }
    case Op::Zext: {
        BitVec out = *args[ 0 ];
        out.resize( w, aig_false );
        return out;
    }
    case Op::Trunc: return BitVec( args[ 0 ]->begin(), args[ 0 ]->begin() + w );
    case Op::Extract: return { ( *args[ 0 ] )[ t.const_value() ] };
    }
    throw std::logic_error( "bit-blaster: unknown operator" );
}

CnfEmitter::CnfEmitter( const Aig& aig, sat::Solver& solver ) : _aig{ aig }, _solver{ solver } {}

sat::Var CnfEmitter::var_of_node( std::uint32_t node ) const
{
    return node < _node_var.size() ? _node_var[ node ] : -1;
}

sat::Lit CnfEmitter::lit( AigLit root )
{
    if ( _node_var.size() < _aig.size() )
        _node_var.resize( _aig.size(), -1 );
    if ( root.node() == 0 )
    {
        if ( _const_var < 0 )
        {
            _const_var = _solver.new_var();
            _solver.add_clause( { sat::Lit::make( _const_var, true ) } );
        }
        return sat::Lit::make( _const_var, root.complemented() );
    }
    std::vector< std::uint32_t > stack{ root.node() };
    while ( !stack.empty() )
    {
        const std::uint32_t n = stack.back();
        if ( _node_var[ n ] >= 0 )
        {
            stack.pop_back();
            continue;
        }
        if ( _aig.is_input( n ) )
        {
            _node_var[ n ] = _solver.new_var();
            stack.pop_back();
            continue;
        }
        const AigLit a = _aig.fanin0( n );
        const AigLit b = _aig.fanin1( n );
        bool ready = true;
        for ( AigLit f : { a, b } )
            if ( f.node() != 0 && _node_var[ f.node() ] < 0 )
            {
                stack.push_back( f.node() );
                ready = false;
            }
        if ( !ready )
            continue;
        stack.pop_back();
        const sat::Var v = _solver.new_var();
        _node_var[ n ] = v;
        const sat::Lit la = lit( a );
        const sat::Lit lb = lit( b );
        const sat::Lit out = sat::Lit::make( v );
        _solver.add_clause( { ~out, la } );
        _solver.add_clause( { ~out, lb } );
        _solver.add_clause( { out, ~la, ~lb } );
    }
    return sat::Lit::make( _node_var[ root.node() ], root.complemented() );
}

} // namespace specfence::logic
