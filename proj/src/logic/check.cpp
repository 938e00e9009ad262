#include "specfence/logic/check.hpp"

#include "specfence/logic/aig.hpp"
#include "specfence/logic/sat_solver.hpp"

#include <algorithm>

namespace specfence::logic
{

std::uint64_t Model::value( std::size_t index ) const
{
    auto it = values.find( index );
    return it == values.end() ? 0 : it->second;
}

std::vector< std::uint64_t > Model::environment( std::size_t size ) const
{
    std::vector< std::uint64_t > env( size, 0 );
    for ( const auto& [ i, v ] : values )
        if ( i < size )
            env[ i ] = v;
    return env;
}

SatResult check_sat( const Formula& f, const CheckOptions& options )
{
    if ( f.width() != 1 )
        throw TypeError( "check_sat: formula must have width 1" );

    Aig aig;
    std::map< std::size_t, BitVec > var_bits;
    BitBlaster blaster( aig, [ & ]( const TermNode& v ) {
        auto [ it, fresh ] = var_bits.try_emplace( v.value );
        if ( fresh )
            for ( unsigned i = 0; i < v.width; ++i )
                it->second.push_back( aig.make_input() );
        return it->second;
    } );
    const AigLit root = blaster.blast_bool( f );

    sat::Solver solver;
    solver.set_conflict_budget( options.conflict_budget );
    solver.set_seed( options.seed );
    CnfEmitter cnf( aig, solver );
    solver.add_clause( { cnf.lit( root ) } );
    // Make sure every variable bit has a SAT variable so the model is total.
    for ( auto& [ _, bits ] : var_bits )
        for ( AigLit b : bits )
            cnf.lit( b );

    const auto result = solver.solve();
    if ( result == sat::Result::Unknown )
        throw ResourceError( "check_sat: conflict budget exhausted" );

    SatResult out;
    out.sat = result == sat::Result::Sat;
    if ( !out.sat )
        return out;

    std::size_t max_index = 0;
    for ( auto& [ index, bits ] : var_bits )
    {
        std::uint64_t value = 0;
        for ( std::size_t i = 0; i < bits.size(); ++i )
            if ( solver.model_true( cnf.lit( bits[ i ] ) ) )
                value |= std::uint64_t{ 1 } << i;
        out.model.values[ index ] = value;
        max_index = std::max( max_index, index );
    }
    const auto env = out.model.environment( var_bits.empty() ? 0 : max_index + 1 );
    if ( evaluate( f, env ) != 1 )
        throw std::logic_error( "check_sat: model does not satisfy the formula" );
    return out;
}

} // namespace specfence::logic
