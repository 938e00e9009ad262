#include "specfence/logic/bmc.hpp"

namespace specfence::logic
{

BmcResult bmc( const encode::TransitionSystem& ts, unsigned max_depth, const CheckOptions& options )
{
    const std::size_t s = ts.num_state();
    const std::size_t n = ts.num_inputs();
    BmcResult result;

    // Unrolled variables: X0 at 0..s-1, the inputs of step d at s + d * n.
    std::vector< Term > frame;
    for ( std::size_t i = 0; i < s; ++i )
        frame.push_back( ts.state_term( i ) );
    const Formula init = ts.init();

    for ( unsigned d = 0; d <= max_depth; ++d )
    {
        const Formula bad = substitute( ts.bad, [ & ]( const TermNode& v ) { return frame.at( v.value ); } );
        const auto r = check_sat( bv_and( init, bad ), options );
        if ( r.sat )
        {
            encode::Trace t;
            encode::State st( s );
            for ( std::size_t i = 0; i < s; ++i )
                st[ i ] = r.model.value( i );
            t.states.push_back( st );
            for ( unsigned k = 0; k < d; ++k )
            {
                std::vector< std::uint64_t > in( n );
                for ( std::size_t j = 0; j < n; ++j )
                    in[ j ] = r.model.value( s + k * n + j );
                st = ts.step( st, in );
                t.states.push_back( st );
                t.inputs.push_back( std::move( in ) );
            }
            if ( auto err = ts.validate_trace( t ) )
                throw std::logic_error( "bmc: replay failed: " + *err );
            result.depth = d;
            result.trace = std::move( t );
            return result;
        }
        if ( d == max_depth )
            break;
        std::vector< Term > inputs;
        for ( std::size_t j = 0; j < n; ++j )
            inputs.push_back( variable( ts.inputs[ j ].name + "@" + std::to_string( d ), ts.inputs[ j ].width,
                                        s + d * n + j ) );
        std::vector< Term > next;
        for ( std::size_t i = 0; i < s; ++i )
            next.push_back( substitute( ts.next[ i ], [ & ]( const TermNode& v ) {
                return v.value < s ? frame[ v.value ] : inputs.at( v.value - s );
            } ) );
        frame = std::move( next );
    }
    return result;
}

} // namespace specfence::logic
