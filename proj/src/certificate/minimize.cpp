#include "specfence/certificate/certificate.hpp"

#include "specfence/logic/aig.hpp"
#include "specfence/logic/sat_solver.hpp"

namespace specfence::certificate
{

using logic::AigLit;
namespace sat = logic::sat;

namespace
{

// One solver holding Tr, Bad and every clause behind an activation literal.
class InvariantQuery
{
    const TransitionSystem& _ts;
    const std::vector< Cube >& _cubes;
    logic::BitLayout _layout;
    logic::Aig _aig;
    std::vector< AigLit > _cur;
    std::vector< AigLit > _nxt;
    AigLit _bad;
    sat::Solver _solver;
    std::unique_ptr< logic::CnfEmitter > _cnf;
    std::vector< sat::Lit > _act;
    std::vector< sat::Lit > _next_cube;

    AigLit cube_lit( const Cube& c, const std::vector< AigLit >& bits )
    {
        AigLit acc = logic::aig_true;
        for ( const auto& l : c.lits() )
            acc = _aig.make_and( acc, l.value ? bits[ l.bit ] : ~bits[ l.bit ] );
        return acc;
    }

public:
    InvariantQuery( const TransitionSystem& ts, const std::vector< Cube >& cubes )
        : _ts{ ts }, _cubes{ cubes }, _layout{ logic::layout_of( ts ) }
    {
        std::vector< unsigned > widths;
        for ( const auto& in : ts.inputs )
            widths.push_back( in.width );
        const logic::BitLayout inputs( widths );
        for ( std::size_t b = 0; b < _layout.num_bits(); ++b )
            _cur.push_back( _aig.make_input() );
        std::vector< AigLit > inp;
        for ( std::size_t b = 0; b < inputs.num_bits(); ++b )
            inp.push_back( _aig.make_input() );
        logic::BitBlaster blaster( _aig, [ & ]( const logic::TermNode& v ) {
            logic::BitVec bits;
            const std::size_t s = ts.num_state();
            if ( v.value >= s + ts.num_inputs() )
                throw std::invalid_argument( "invariant check: next-state function mentions a primed variable" );
            for ( unsigned k = 0; k < v.width; ++k )
                bits.push_back( v.value < s ? _cur[ _layout.offset( v.value ) + k ]
                                            : inp[ inputs.offset( v.value - s ) + k ] );
            return bits;
        } );
        for ( std::size_t i = 0; i < ts.num_state(); ++i )
        {
            const auto bits = blaster.blast( ts.next[ i ] );
            _nxt.insert( _nxt.end(), bits.begin(), bits.end() );
        }
        _bad = blaster.blast_bool( ts.bad );
        std::vector< AigLit > now, next;
        for ( const auto& c : cubes )
        {
            for ( const auto& l : c.lits() )
                if ( l.bit >= _layout.num_bits() )
                    throw std::invalid_argument( "invariant check: cube bit outside the system's state" );
            now.push_back( cube_lit( c, _cur ) );
            next.push_back( cube_lit( c, _nxt ) );
        }
        _cnf = std::make_unique< logic::CnfEmitter >( _aig, _solver );
        for ( std::size_t k = 0; k < cubes.size(); ++k )
        {
            _act.push_back( sat::Lit::make( _solver.new_var() ) );
            _solver.add_clause( { ~_act.back(), ~_cnf->lit( now[ k ] ) } );
            _next_cube.push_back( _cnf->lit( next[ k ] ) );
        }
    }

    // The first condition violated by the clauses in `use`, if any.
    std::optional< Condition > failure( const std::vector< bool >& use )
    {
        std::vector< sat::Lit > assumptions;
        for ( std::size_t k = 0; k < _cubes.size(); ++k )
            if ( use[ k ] )
            {
                if ( _cubes[ k ].intersects( _ts.init_values, _layout ) )
                    return Condition::Initiation;
                assumptions.push_back( _act[ k ] );
            }
        // Some selected clause is violated after one step.
        const auto q = sat::Lit::make( _solver.new_var() );
        std::vector< sat::Lit > some{ ~q };
        for ( std::size_t k = 0; k < _cubes.size(); ++k )
            if ( use[ k ] )
                some.push_back( _next_cube[ k ] );
        _solver.add_clause( some );
        assumptions.push_back( q );
        const auto consecution = _solver.solve( assumptions );
        _solver.add_clause( { ~q } );
        if ( consecution == sat::Result::Sat )
            return Condition::Consecution;
        assumptions.back() = _cnf->lit( _bad );
        if ( _solver.solve( assumptions ) == sat::Result::Sat )
            return Condition::Safety;
        return std::nullopt;
    }
};

} // namespace

std::optional< Condition > invariant_failure( const TransitionSystem& ts, const std::vector< Cube >& invariant )
{
    InvariantQuery q( ts, invariant );
    return q.failure( std::vector< bool >( invariant.size(), true ) );
}

std::vector< Cube > minimize_invariant( const TransitionSystem& ts, const std::vector< Cube >& invariant )
{
    InvariantQuery q( ts, invariant );
    std::vector< bool > use( invariant.size(), true );
    if ( const auto f = q.failure( use ) )
        throw std::invalid_argument( "minimize_invariant: not a safe inductive invariant, fails " + to_string( *f ) );
    for ( std::size_t k = 0; k < invariant.size(); ++k )
    {
        use[ k ] = false;
        if ( q.failure( use ) )
            use[ k ] = true;
    }
    std::vector< Cube > out;
    for ( std::size_t k = 0; k < invariant.size(); ++k )
        if ( use[ k ] )
            out.push_back( invariant[ k ] );
    return out;
}

} // namespace specfence::certificate
