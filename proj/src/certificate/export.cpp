#include "specfence/certificate/certificate.hpp"

#include "specfence/logic/aig.hpp"

#include <algorithm>
#include <functional>

namespace specfence::certificate
{

namespace
{

SExpr apply( std::string op, std::vector< SExpr > args )
{
    args.insert( args.begin(), SExpr( std::move( op ) ) );
    return SExpr( std::move( args ) );
}

SExpr negate( SExpr e ) { return apply( "not", { std::move( e ) } ); }

SExpr join( const std::string& op, std::vector< SExpr > args, const char* empty )
{
    if ( args.empty() )
        return SExpr( empty );
    if ( args.size() == 1 )
        return std::move( args.front() );
    return apply( op, std::move( args ) );
}

SExpr define( const std::string& name, SExpr body )
{
    return apply( "define-fun", { SExpr( name ), SExpr( std::vector< SExpr >{} ), SExpr( "Bool" ), std::move( body ) } );
}

std::string bit_name( char prefix, std::size_t b ) { return prefix + std::to_string( b ); }

std::string range( char prefix, std::size_t first, unsigned width )
{
    if ( width == 1 )
        return bit_name( prefix, first );
    return bit_name( prefix, first ) + ".." + bit_name( prefix, first + width - 1 );
}

// The script shared by both invariant forms: the AIG holds x, u and y bits
// as inputs in that order.
class Writer
{
public:
    const TransitionSystem& ts;
    logic::BitLayout layout;
    logic::BitLayout input_layout;
    logic::Aig aig;
    std::vector< logic::AigLit > x, u, y;
    std::map< std::uint32_t, char > input_prefix;
    std::map< std::uint32_t, std::size_t > input_bit;

    explicit Writer( const TransitionSystem& system ) : ts{ system }, layout{ logic::layout_of( system ) }
    {
        std::vector< unsigned > widths;
        for ( const auto& in : ts.inputs )
            widths.push_back( in.width );
        input_layout = logic::BitLayout( widths );
        auto make = [ & ]( std::vector< logic::AigLit >& bits, std::size_t n, char prefix ) {
            for ( std::size_t b = 0; b < n; ++b )
            {
                bits.push_back( aig.make_input() );
                input_prefix[ bits.back().node() ] = prefix;
                input_bit[ bits.back().node() ] = b;
            }
        };
        make( x, layout.num_bits(), 'x' );
        make( u, input_layout.num_bits(), 'u' );
        make( y, layout.num_bits(), 'y' );
    }

    logic::BitBlaster blaster( const std::vector< logic::AigLit >& state )
    {
        return logic::BitBlaster( aig, [ this, &state ]( const logic::TermNode& v ) {
            logic::BitVec bits;
            const std::size_t s = ts.num_state();
            for ( unsigned k = 0; k < v.width; ++k )
            {
                if ( v.value < s )
                    bits.push_back( state[ layout.offset( v.value ) + k ] );
                else if ( v.value < s + ts.num_inputs() )
                    bits.push_back( u[ input_layout.offset( v.value - s ) + k ] );
                else
                    bits.push_back( y[ layout.offset( v.value - s - ts.num_inputs() ) + k ] );
            }
            return bits;
        } );
    }

    SExpr lit( logic::AigLit l ) const
    {
        SExpr base;
        if ( l.node() == 0 )
            return SExpr( l.complemented() ? "true" : "false" );
        if ( aig.is_input( l.node() ) )
            base = SExpr( bit_name( input_prefix.at( l.node() ), input_bit.at( l.node() ) ) );
        else
            base = SExpr( bit_name( 'g', l.node() ) );
        return l.complemented() ? negate( std::move( base ) ) : base;
    }

    // Gate definitions for the cones of the roots, fanins first.
    std::vector< SExpr > gates( const std::vector< logic::AigLit >& roots ) const
    {
        std::vector< char > needed( aig.size(), 0 );
        std::vector< std::uint32_t > stack;
        for ( const auto& r : roots )
            stack.push_back( r.node() );
        while ( !stack.empty() )
        {
            const auto n = stack.back();
            stack.pop_back();
            if ( needed[ n ] || !aig.is_and( n ) )
                continue;
            needed[ n ] = 1;
            stack.push_back( aig.fanin0( n ).node() );
            stack.push_back( aig.fanin1( n ).node() );
        }
        std::vector< SExpr > out;
        for ( std::uint32_t n = 0; n < aig.size(); ++n )
            if ( needed[ n ] )
                out.push_back( define( bit_name( 'g', n ), apply( "and", { lit( aig.fanin0( n ) ), lit( aig.fanin1( n ) ) } ) ) );
        return out;
    }

    std::string write( const CertificateInfo& info, const std::vector< std::string >& notes, SExpr inv, SExpr inv_next,
                       std::vector< logic::AigLit > extra_roots )
    {
        Script s;
        auto comment = [ & ]( std::string t ) { s.items.emplace_back( Comment{ " " + std::move( t ) } ); };
        auto command = [ & ]( SExpr e ) { s.items.emplace_back( std::move( e ) ); };

        comment( "specfence safety certificate" );
        comment( "program: " + info.program );
        comment( "threat: " + info.threat );
        comment( "mode: " + ( ts.mode ? encode::to_string( *ts.mode ) : std::string( "standard" ) ) );
        std::string fences;
        for ( const auto& f : encode::active_fences( ts ) )
            fences += ( fences.empty() ? "" : "," ) + f;
        comment( "fences: " + ( fences.empty() ? std::string( "none" ) : fences ) );
        comment( "state bits x<b>, next-state bits y<b>, input bits u<b>, least significant first" );
        for ( std::size_t v = 0; v < ts.num_state(); ++v )
            comment( "state " + range( 'x', layout.offset( v ), layout.width( v ) ) + " = " + ts.state_vars[ v ].name );
        for ( std::size_t j = 0; j < ts.num_inputs(); ++j )
            comment( "input " + range( 'u', input_layout.offset( j ), input_layout.width( j ) ) + " = " + ts.inputs[ j ].name );
        for ( const auto& n : notes )
            comment( n );

        command( apply( "set-logic", { SExpr( "QF_BV" ) } ) );
        for ( const auto* bits : { &x, &u, &y } )
            for ( const auto& b : *bits )
                command( apply( "declare-const", { lit( b ), SExpr( "Bool" ) } ) );

        // Tr: y = next(x, u); Init: the fixed bits of pc, spec and fences.
        auto next_blaster = blaster( x );
        std::vector< logic::AigLit > next_bits;
        for ( std::size_t i = 0; i < ts.num_state(); ++i )
        {
            const auto bits = next_blaster.blast( ts.next[ i ] );
            next_bits.insert( next_bits.end(), bits.begin(), bits.end() );
        }
        const auto bad = next_blaster.blast_bool( ts.bad );

        std::vector< logic::AigLit > roots = next_bits;
        roots.push_back( bad );
        roots.insert( roots.end(), extra_roots.begin(), extra_roots.end() );
        for ( auto& g : gates( roots ) )
            command( std::move( g ) );

        std::vector< SExpr > init;
        for ( std::size_t v = 0; v < ts.num_state(); ++v )
            if ( const auto& value = ts.init_values[ v ] )
                for ( unsigned k = 0; k < layout.width( v ); ++k )
                {
                    const auto b = x[ layout.offset( v ) + k ];
                    init.push_back( lit( ( ( *value >> k ) & 1 ) != 0 ? b : ~b ) );
                }
        command( define( "Init", join( "and", std::move( init ), "true" ) ) );
        std::vector< SExpr > tr;
        for ( std::size_t b = 0; b < next_bits.size(); ++b )
            tr.push_back( apply( "=", { lit( y[ b ] ), lit( next_bits[ b ] ) } ) );
        command( define( "Tr", join( "and", std::move( tr ), "true" ) ) );
        command( define( "Bad", lit( bad ) ) );
        command( define( "Inv", std::move( inv ) ) );
        command( define( "Inv_next", std::move( inv_next ) ) );

        const std::pair< const char*, SExpr > checks[] = {
            { "condition (i): Init -> Inv", apply( "and", { SExpr( "Init" ), negate( SExpr( "Inv" ) ) } ) },
            { "condition (ii): Inv & Tr -> Inv'",
              apply( "and", { SExpr( "Inv" ), SExpr( "Tr" ), negate( SExpr( "Inv_next" ) ) } ) },
            { "condition (iii): Inv -> !Bad", apply( "and", { SExpr( "Inv" ), SExpr( "Bad" ) } ) },
        };
        for ( const auto& [ title, query ] : checks )
        {
            comment( title );
            command( apply( "push", { SExpr( "1" ) } ) );
            command( apply( "assert", { query } ) );
            command( SExpr( std::vector< SExpr >{ SExpr( "check-sat" ) } ) );
            command( apply( "pop", { SExpr( "1" ) } ) );
        }
        return print_script( s );
    }
};

SExpr clauses( const std::vector< Cube >& cubes, char prefix )
{
    std::vector< SExpr > out;
    for ( const auto& c : cubes )
    {
        std::vector< SExpr > lits;
        for ( const auto& l : c.lits() )
        {
            SExpr b( bit_name( prefix, l.bit ) );
            lits.push_back( l.value ? negate( std::move( b ) ) : std::move( b ) );
        }
        out.push_back( join( "or", std::move( lits ), "false" ) );
    }
    return join( "and", std::move( out ), "true" );
}

} // namespace

std::string export_certificate( const TransitionSystem& ts, const std::vector< Cube >& invariant,
                                const CertificateInfo& info )
{
    Writer w( ts );
    for ( const auto& c : invariant )
        for ( const auto& l : c.lits() )
            if ( l.bit >= w.layout.num_bits() )
                throw std::invalid_argument( "certificate: cube bit outside the system's state" );
    std::vector< std::string > notes{ "invariant: " + std::to_string( invariant.size() ) + " clauses" };
    for ( const auto& c : invariant )
    {
        std::vector< std::string > names;
        for ( const auto& v : ts.state_vars )
            names.push_back( v.name );
        notes.push_back( "  not (" + logic::render_cube( c, w.layout, names ) + ")" );
    }
    return w.write( info, notes, clauses( invariant, 'x' ), clauses( invariant, 'y' ), {} );
}

std::string export_certificate( const TransitionSystem& ts, const logic::Formula& invariant,
                                const CertificateInfo& info )
{
    Writer w( ts );
    auto now = w.blaster( w.x );
    auto next = w.blaster( w.y );
    const auto inv = now.blast_bool( invariant );
    const auto inv_next = next.blast_bool( invariant );
    return w.write( info, { "invariant: formula" }, w.lit( inv ), w.lit( inv_next ), { inv, inv_next } );
}

} // namespace specfence::certificate
