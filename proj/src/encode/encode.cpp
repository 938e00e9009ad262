#include "specfence/encode/transition_system.hpp"

#include <algorithm>

namespace specfence::encode
{

using namespace logic;
using ir::Label;

namespace
{

bool falls_into_halt( const ir::Program& p )
{
    const Label n = p.halt_label();
    for ( Label l = 0; l < n; ++l )
        for ( Label s : ir::successors( p, l ) )
            if ( s == n )
                return true;
    return false;
}

unsigned bits_for( std::uint64_t count )
{
    unsigned w = 1;
    while ( w < 64 && ( std::uint64_t{ 1 } << w ) < count )
        ++w;
    return w;
}

class Encoder
{
public:
    Encoder( const ir::Program& p, bool speculative, const std::set< Label >& vinst,
             const std::vector< FenceSite >& sites, SpeculationMode mode, const std::set< std::string >& active,
             const EncodeOptions& options )
            : _p{ p }, _spec{ speculative }, _vinst{ speculative ? vinst : std::set< Label >{} }, _sites{ sites },
              _mode{ mode }
    {
        declare( active, options );
        build();
    }

    TransitionSystem take() { return std::move( _ts ); }

private:
    void declare( const std::set< std::string >& active, const EncodeOptions& options )
    {
        _ts.name = _p.name;
        for ( const auto& v : _p.vars )
        {
            _vars[ v.name ] = _ts.state_vars.size();
            _ts.state_vars.push_back( { v.name, VarKind::Data, v.width } );
        }
        for ( const auto& a : _p.arrays )
        {
            auto& cells = _cells[ a.name ];
            for ( unsigned j = 0; j < a.length; ++j )
            {
                cells.push_back( _ts.state_vars.size() );
                _ts.state_vars.push_back( { a.name + "[" + std::to_string( j ) + "]", VarKind::ArrayCell, a.elem_width } );
            }
        }

        // Code points: instructions, the halt label if reachable by control
        // flow, then one assertion node per vulnerable instruction, and
        // bottom as the all-ones code.
        std::uint64_t code = 0;
        for ( Label l = 0; l < _p.insts.size(); ++l )
            _ts.pc_codes.push_back( { CodeKind::Instruction, l, code++ } );
        if ( falls_into_halt( _p ) )
            _ts.pc_codes.push_back( { CodeKind::Halt, _p.halt_label(), code++ } );
        for ( Label l : _vinst )
            _ts.pc_codes.push_back( { CodeKind::Assertion, l, code++ } );
        _pc_width = bits_for( code + 1 );
        _ts.pc_codes.push_back( { CodeKind::Bottom, 0, width_mask( _pc_width ) } );

        _ts.pc_var = _ts.state_vars.size();
        _ts.state_vars.push_back( { "pc", VarKind::Pc, _pc_width } );
        if ( _spec )
        {
            _spec_width = _mode.bound ? bits_for( std::uint64_t{ *_mode.bound } + 1 ) : 1;
            if ( _mode.bound && *_mode.bound == 0 )
                throw std::invalid_argument( "speculation bound must be at least 1" );
            _ts.spec_var = _ts.state_vars.size();
            _ts.state_vars.push_back( { "spec", VarKind::Spec, _spec_width } );
            std::set< std::string > ids;
            for ( const auto& s : _sites )
            {
                if ( !ids.insert( s.id ).second )
                    throw std::invalid_argument( "duplicate fence site '" + s.id + "'" );
                _ts.fence_vars[ s.id ] = _ts.state_vars.size();
                _ts.state_vars.push_back( { "fence[" + s.id + "]", VarKind::Fence, 1 } );
            }
            for ( const auto& a : active )
                if ( !ids.contains( a ) )
                    throw std::invalid_argument( "unknown fence site '" + a + "'" );
            _ts.fence_sites = _sites;
            _ts.mode = _mode;
            _ts.vinst = _vinst;
        }
        if ( _ts.state_bits() > options.max_state_bits )
            throw CapacityError( "system needs " + std::to_string( _ts.state_bits() ) + " state bits, budget is " +
                                 std::to_string( options.max_state_bits ) );

        for ( Label l = 0; l < _p.insts.size(); ++l )
        {
            if ( _spec && std::holds_alternative< ir::CondBranch >( _p.insts[ l ] ) )
            {
                _choice[ l ] = _ts.inputs.size();
                _ts.inputs.push_back( { "choose_" + ir::label_name( l ), 1 } );
            }
            if ( const auto* ld = std::get_if< ir::Load >( &_p.insts[ l ] ) )
            {
                const auto* a = _p.find_array( ld->array );
                if ( ld->index->width >= 64 || ( std::uint64_t{ 1 } << ld->index->width ) > a->length )
                {
                    _havoc[ l ] = _ts.inputs.size();
                    _ts.inputs.push_back( { "havoc_" + ir::label_name( l ), a->elem_width } );
                }
            }
        }

        _ts.init_values.assign( _ts.state_vars.size(), std::nullopt );
        _ts.init_values[ *_ts.pc_var ] = entry( 0 );
        if ( _spec )
        {
            _ts.init_values[ *_ts.spec_var ] = 0;
            for ( const auto& [ id, v ] : _ts.fence_vars )
                _ts.init_values[ v ] = active.contains( id ) ? 1 : 0;
        }
        _ts.declare_terms();
    }

    std::uint64_t entry( Label l ) const
    {
        if ( l == _p.halt_label() )
            return _ts.pc_code( CodeKind::Halt, l );
        if ( _vinst.contains( l ) )
            return _ts.pc_code( CodeKind::Assertion, l );
        return _ts.pc_code( CodeKind::Instruction, l );
    }

    Term pc() const { return _ts.state_term( *_ts.pc_var ); }
    Term pc_const( std::uint64_t c ) const { return constant( c, _pc_width ); }
    Term at( std::uint64_t c ) const { return eq( pc(), pc_const( c ) ); }

    Term spec() const { return _ts.state_term( *_ts.spec_var ); }
    Formula spec_positive() const { return bv_not( eq( spec(), constant( 0, _spec_width ) ) ); }
    Term spec_inc() const
    {
        return _mode.bound ? add( spec(), constant( 1, _spec_width ) ) : constant( 1, 1 );
    }
    // Speculation window still open; always true when unbounded.
    Formula live() const
    {
        if ( !_spec || !_mode.bound )
            return tt();
        return ult( spec(), constant( *_mode.bound, _spec_width ) );
    }

    Term fence( const std::string& id ) const { return _ts.state_term( _ts.fence_vars.at( id ) ); }

    Term expr( const ir::Expr& e ) const
    {
        switch ( e.kind )
        {
        case ir::ExprKind::Var: return _ts.state_term( _vars.at( e.name ) );
        case ir::ExprKind::Const: return constant( e.value, e.width );
        case ir::ExprKind::Not: return bv_not( expr( *e.args[ 0 ] ) );
        case ir::ExprKind::Zext: return zext( expr( *e.args[ 0 ] ), e.width );
        case ir::ExprKind::Trunc: return trunc( expr( *e.args[ 0 ] ), e.width );
        case ir::ExprKind::Ite: return ite( expr( *e.args[ 0 ] ), expr( *e.args[ 1 ] ), expr( *e.args[ 2 ] ) );
        default: break;
        }
        const Term a = expr( *e.args[ 0 ] );
        const Term b = expr( *e.args[ 1 ] );
        switch ( e.kind )
        {
        case ir::ExprKind::Add: return add( a, b );
        case ir::ExprKind::Sub: return sub( a, b );
        case ir::ExprKind::Mul: return mul( a, b );
        case ir::ExprKind::And: return bv_and( a, b );
        case ir::ExprKind::Or: return bv_or( a, b );
        case ir::ExprKind::Xor: return bv_xor( a, b );
        case ir::ExprKind::Eq: return eq( a, b );
        case ir::ExprKind::Ult: return ult( a, b );
        case ir::ExprKind::Ule: return ule( a, b );
        default: break;
        }
        throw std::logic_error( "encode: unknown expression kind" );
    }

    // Number of cells an index of this width can address.
    static unsigned addressable( unsigned index_width, unsigned length )
    {
        if ( index_width >= 7 )
            return length;
        return static_cast< unsigned >( std::min< std::uint64_t >( length, std::uint64_t{ 1 } << index_width ) );
    }

    using Updates = std::vector< std::pair< std::size_t, Term > >;

    void emit( Formula guard, Updates u, std::string origin )
    {
        if ( guard.is_false() )
            return;
        _ts.updates.push_back( { std::move( guard ), std::move( u ), std::move( origin ) } );
    }

    // Data effects of an unconditional instruction.
    Updates effects( Label l ) const
    {
        Updates u;
        std::visit(
                [ & ]( const auto& inst ) {
                    using T = std::decay_t< decltype( inst ) >;
                    if constexpr ( std::is_same_v< T, ir::Assign > )
                        u.emplace_back( _vars.at( inst.dest ), expr( *inst.value ) );
                    else if constexpr ( std::is_same_v< T, ir::Load > )
                    {
                        const auto& cells = _cells.at( inst.array );
                        const Term idx = expr( *inst.index );
                        const unsigned n = addressable( idx.width(), static_cast< unsigned >( cells.size() ) );
                        Term value = _havoc.contains( l ) ? _ts.input_term( _havoc.at( l ) )
                                                          : _ts.state_term( cells[ n - 1 ] );
                        const unsigned top = _havoc.contains( l ) ? n : n - 1;
                        for ( unsigned j = top; j-- > 0; )
                            value = ite( eq( idx, constant( j, idx.width() ) ), _ts.state_term( cells[ j ] ), value );
                        u.emplace_back( _vars.at( inst.dest ), value );
                    }
                    else if constexpr ( std::is_same_v< T, ir::Store > )
                    {
                        const auto& cells = _cells.at( inst.array );
                        const Term idx = expr( *inst.index );
                        const Term v = expr( *inst.value );
                        const unsigned n = addressable( idx.width(), static_cast< unsigned >( cells.size() ) );
                        for ( unsigned j = 0; j < n; ++j )
                            u.emplace_back( cells[ j ],
                                            ite( eq( idx, constant( j, idx.width() ) ), v, _ts.state_term( cells[ j ] ) ) );
                    }
                },
                _p.insts[ l ] );
        return u;
    }

    Updates with_spec_step( Updates u ) const
    {
        if ( _spec && _mode.bound )
            u.emplace_back( *_ts.spec_var, ite( spec_positive(), spec_inc(), constant( 0, _spec_width ) ) );
        return u;
    }

    void build_instruction( Label l )
    {
        const std::uint64_t code = _ts.pc_code( CodeKind::Instruction, l );
        Formula here = bv_and( live(), at( code ) );
        const std::string origin = ir::label_name( l );
        const std::size_t pcv = *_ts.pc_var;

        // Before-sites are checked at the entry code point; for vulnerable
        // instructions that is the assertion node.
        if ( _spec && !_vinst.contains( l ) )
        {
            Formula blocked = before_fences( l );
            if ( !blocked.is_false() )
            {
                emit( bv_and( here, blocked ), {}, origin + " fenced" );
                here = bv_and( here, bv_not( blocked ) );
            }
        }

        const auto& inst = _p.insts[ l ];
        if ( const auto* br = std::get_if< ir::CondBranch >( &inst ) )
        {
            const Term cond = expr( *br->cond );
            if ( !_spec )
            {
                emit( here, { { pcv, ite( cond, pc_const( entry( br->then_target ) ), pc_const( entry( br->else_target ) ) ) } },
                      origin );
                return;
            }
            const Term choose = _ts.input_term( _choice.at( l ) );
            const Formula wrong = bv_xor( choose, cond );
            const Formula speculating = bv_or( wrong, spec_positive() );
            Formula edge = ff();
            for ( const auto& s : _sites )
                if ( s.branch == l )
                    edge = bv_or( edge, bv_and( fence( s.id ), s.position == FencePosition::AfterBranchThen
                                                                      ? choose
                                                                      : bv_not( choose ) ) );
            Formula blocked = bv_and( edge, speculating );
            if ( !blocked.is_false() )
            {
                emit( bv_and( here, blocked ), {}, origin + " edge-fenced" );
                here = bv_and( here, bv_not( blocked ) );
            }
            Term next_spec = _mode.bound ? ite( speculating, spec_inc(), constant( 0, _spec_width ) ) : speculating;
            emit( here,
                  { { pcv, ite( choose, pc_const( entry( br->then_target ) ), pc_const( entry( br->else_target ) ) ) },
                    { *_ts.spec_var, next_spec } },
                  origin );
            return;
        }
        if ( const auto* g = std::get_if< ir::Goto >( &inst ) )
        {
            emit( here, with_spec_step( { { pcv, pc_const( entry( g->target ) ) } } ), origin );
            return;
        }
        if ( const auto* as = std::get_if< ir::Assume >( &inst ) )
        {
            const Term cond = expr( *as->cond );
            emit( bv_and( here, cond ), with_spec_step( { { pcv, pc_const( entry( l + 1 ) ) } } ), origin );
            emit( bv_and( here, bv_not( cond ) ), {}, origin + " blocked" );
            return;
        }
        if ( const auto* as = std::get_if< ir::Assert >( &inst ) )
        {
            const Term cond = expr( *as->cond );
            emit( bv_and( here, cond ), with_spec_step( { { pcv, pc_const( entry( l + 1 ) ) } } ), origin );
            emit( bv_and( here, bv_not( cond ) ), with_spec_step( { { pcv, pc_const( _ts.bottom_code() ) } } ),
                  origin + " failed" );
            return;
        }
        if ( std::holds_alternative< ir::Halt >( inst ) )
        {
            emit( here, {}, origin );
            return;
        }
        Updates u = effects( l );
        u.emplace_back( pcv, pc_const( entry( l + 1 ) ) );
        emit( here, with_spec_step( std::move( u ) ), origin );
    }

    Formula before_fences( Label l ) const
    {
        Formula any = ff();
        for ( const auto& s : _sites )
            if ( s.position == FencePosition::Before && s.anchor == l )
                any = bv_or( any, fence( s.id ) );
        return any.is_false() ? any : bv_and( any, spec_positive() );
    }

    void build()
    {
        const std::size_t pcv = *_ts.pc_var;
        for ( Label l = 0; l < _p.insts.size(); ++l )
            build_instruction( l );
        std::set< std::uint64_t > used;
        for ( const auto& c : _ts.pc_codes )
            used.insert( c.code );
        for ( const auto& c : _ts.pc_codes )
        {
            const Formula here = bv_and( live(), at( c.code ) );
            if ( c.kind == CodeKind::Halt )
                emit( here, {}, "halt" );
            else if ( c.kind == CodeKind::Bottom )
                emit( here, {}, "bottom" );
            else if ( c.kind == CodeKind::Assertion )
            {
                Formula h = here;
                const Formula blocked = before_fences( c.label );
                const std::string origin = "a_" + ir::label_name( c.label );
                if ( !blocked.is_false() )
                {
                    emit( bv_and( h, blocked ), {}, origin + " fenced" );
                    h = bv_and( h, bv_not( blocked ) );
                }
                emit( h,
                      { { pcv, ite( spec_positive(), pc_const( _ts.bottom_code() ),
                                    pc_const( _ts.pc_code( CodeKind::Instruction, c.label ) ) ) } },
                      origin );
            }
        }
        for ( std::uint64_t code = 0; code <= width_mask( _pc_width ); ++code )
            if ( !used.contains( code ) )
                emit( bv_and( live(), at( code ) ), {}, "unused" );
        if ( _spec && _mode.bound )
            emit( bv_not( live() ), {}, "saturated" );

        // Guards are pairwise exclusive, so each next-state function is an
        // ite chain over the guards that touch the variable.
        const std::size_t n = _ts.state_vars.size();
        _ts.next.assign( n, Term{} );
        std::vector< std::vector< std::pair< Formula, Term > > > per_var( n );
        for ( const auto& u : _ts.updates )
            for ( const auto& [ v, t ] : u.updates )
                per_var[ v ].emplace_back( u.guard, t );
        for ( std::size_t v = 0; v < n; ++v )
        {
            Term acc = _ts.state_term( v );
            for ( auto it = per_var[ v ].rbegin(); it != per_var[ v ].rend(); ++it )
                acc = ite( it->first, it->second, acc );
            _ts.next[ v ] = acc;
        }
        _ts.bad = at( _ts.bottom_code() );
    }

    const ir::Program& _p;
    bool _spec;
    std::set< Label > _vinst;
    std::vector< FenceSite > _sites;
    SpeculationMode _mode;
    TransitionSystem _ts;
    std::map< std::string, std::size_t > _vars;
    std::map< std::string, std::vector< std::size_t > > _cells;
    std::map< Label, std::size_t > _choice;
    std::map< Label, std::size_t > _havoc;
    unsigned _pc_width = 1;
    unsigned _spec_width = 1;
};

} // namespace

TransitionSystem encode_standard( const ir::Program& p, const EncodeOptions& options )
{
    return Encoder( p, false, {}, {}, SpeculationMode::unbounded(), {}, options ).take();
}

std::vector< FenceSite > fence_sites( const ir::Program& p, const std::set< Label >& vinst, Placement placement )
{
    std::vector< FenceSite > out;
    switch ( placement )
    {
    case Placement::EveryInst:
        for ( Label l = 0; l < p.insts.size(); ++l )
        {
            const auto& inst = p.insts[ l ];
            if ( std::holds_alternative< ir::Halt >( inst ) || std::holds_alternative< ir::Assume >( inst ) ||
                 std::holds_alternative< ir::Assert >( inst ) )
                continue;
            out.push_back( { "before@" + ir::label_name( l ), l, FencePosition::Before, std::nullopt } );
        }
        break;
    case Placement::AfterBranch:
        for ( Label l : ir::conditional_instructions( p ) )
        {
            const auto& br = std::get< ir::CondBranch >( p.insts[ l ] );
            out.push_back( { "then@" + ir::label_name( l ), br.then_target, FencePosition::AfterBranchThen, l } );
            out.push_back( { "else@" + ir::label_name( l ), br.else_target, FencePosition::AfterBranchElse, l } );
        }
        break;
    case Placement::BeforeMemory:
        for ( Label l : vinst )
            out.push_back( { "before@" + ir::label_name( l ), l, FencePosition::Before, std::nullopt } );
        break;
    }
    return out;
}

TransitionSystem encode_speculative( const ir::Program& p, const std::set< Label >& vinst,
                                     const std::vector< FenceSite >& sites, SpeculationMode mode,
                                     const std::set< std::string >& active, const EncodeOptions& options )
{
    for ( Label l : vinst )
        if ( l >= p.insts.size() )
            throw std::invalid_argument( "vulnerable instruction " + ir::label_name( l ) + " does not exist" );
    return Encoder( p, true, vinst, sites, mode, active, options ).take();
}

} // namespace specfence::encode
