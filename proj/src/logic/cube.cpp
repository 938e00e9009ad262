#include "specfence/logic/cube.hpp"

#include "specfence/logic/check.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace specfence::logic
{

BitLayout::BitLayout( std::vector< unsigned > widths ) : _widths{ std::move( widths ) }
{
    std::uint32_t at = 0;
    for ( std::size_t v = 0; v < _widths.size(); ++v )
    {
        _offsets.push_back( at );
        for ( unsigned b = 0; b < _widths[ v ]; ++b )
            _owner.push_back( static_cast< std::uint32_t >( v ) );
        at += _widths[ v ];
    }
}

BitLayout layout_of( const encode::TransitionSystem& ts )
{
    std::vector< unsigned > widths;
    for ( const auto& v : ts.state_vars )
        widths.push_back( v.width );
    return BitLayout( std::move( widths ) );
}

Cube::Cube( std::vector< BitLit > lits ) : _lits{ std::move( lits ) }
{
    std::sort( _lits.begin(), _lits.end() );
    _lits.erase( std::unique( _lits.begin(), _lits.end() ), _lits.end() );
    for ( std::size_t i = 1; i < _lits.size(); ++i )
        if ( _lits[ i ].bit == _lits[ i - 1 ].bit )
            throw std::invalid_argument( "cube: contradictory literals on bit " + std::to_string( _lits[ i ].bit ) );
}

bool Cube::contains( const BitLit& l ) const { return std::binary_search( _lits.begin(), _lits.end(), l ); }

bool Cube::subsumes( const Cube& other ) const
{
    return std::includes( other._lits.begin(), other._lits.end(), _lits.begin(), _lits.end() );
}

Cube Cube::without( std::size_t i ) const
{
    Cube c;
    c._lits = _lits;
    c._lits.erase( c._lits.begin() + static_cast< std::ptrdiff_t >( i ) );
    return c;
}

bool Cube::holds( const encode::State& s, const BitLayout& layout ) const
{
    return std::all_of( _lits.begin(), _lits.end(),
                        [ & ]( const BitLit& l ) { return layout.bit_value( s, l.bit ) == l.value; } );
}

bool Cube::intersects( const std::vector< std::optional< std::uint64_t > >& fixed, const BitLayout& layout ) const
{
    for ( const auto& l : _lits )
    {
        const auto& v = fixed[ layout.var_of( l.bit ) ];
        if ( v && ( ( ( *v >> layout.position( l.bit ) ) & 1 ) != 0 ) != l.value )
            return false;
    }
    return true;
}

Cube state_cube( const encode::State& s, const BitLayout& layout )
{
    std::vector< BitLit > lits;
    for ( std::uint32_t b = 0; b < layout.num_bits(); ++b )
        lits.push_back( { b, layout.bit_value( s, b ) } );
    return Cube( std::move( lits ) );
}

CubeVocabulary vocabulary_of( const encode::TransitionSystem& ts )
{
    CubeVocabulary v;
    v.layout = layout_of( ts );
    for ( std::size_t i = 0; i < ts.num_state(); ++i )
    {
        v.current.push_back( ts.state_term( i ) );
        v.primed.push_back( ts.next_term( i ) );
    }
    return v;
}

Formula literal_formula( const BitLit& l, const BitLayout& layout, const std::vector< Term >& vars )
{
    const Term& v = vars.at( layout.var_of( l.bit ) );
    const Formula bit = v.width() == 1 ? v : extract_bit( v, layout.position( l.bit ) );
    return l.value ? bit : bv_not( bit );
}

Formula cube_formula( const Cube& c, const BitLayout& layout, const std::vector< Term >& vars )
{
    std::vector< Formula > parts;
    for ( const auto& l : c.lits() )
        parts.push_back( literal_formula( l, layout, vars ) );
    return conj( parts );
}

Formula lemma_formula( const Cube& c, const BitLayout& layout, const std::vector< Term >& vars )
{
    return bv_not( cube_formula( c, layout, vars ) );
}

std::string render_cube( const Cube& c, const BitLayout& layout, const std::vector< std::string >& names )
{
    // Variables whose bits are all fixed print as a value.
    std::map< std::size_t, std::vector< BitLit > > by_var;
    for ( const auto& l : c.lits() )
        by_var[ layout.var_of( l.bit ) ].push_back( l );
    std::ostringstream os;
    bool first = true;
    for ( const auto& [ var, lits ] : by_var )
    {
        auto sep = [ & ]() {
            if ( !first )
                os << " & ";
            first = false;
        };
        if ( lits.size() == layout.width( var ) )
        {
            std::uint64_t value = 0;
            for ( const auto& l : lits )
                if ( l.value )
                    value |= std::uint64_t{ 1 } << layout.position( l.bit );
            sep();
            os << names[ var ] << "=" << value;
            continue;
        }
        for ( const auto& l : lits )
        {
            sep();
            os << names[ var ] << "[" << layout.position( l.bit ) << "]=" << ( l.value ? 1 : 0 );
        }
    }
    return first ? "true" : os.str();
}

Cube drop_literals( const Cube& c, const std::function< std::optional< Cube >( const Cube& ) >& try_block )
{
    // Passes repeat until none drops a literal: a literal that had to stay
    // may become droppable once others are gone.
    Cube current = c;
    for ( bool changed = true; changed; )
    {
        changed = false;
        std::size_t i = 0;
        while ( i < current.size() && current.size() > 1 )
        {
            const BitLit dropped = current.lits()[ i ];
            if ( auto smaller = try_block( current.without( i ) ) )
            {
                current = *smaller;
                changed = true;
                i = static_cast< std::size_t >( std::lower_bound( current.lits().begin(), current.lits().end(), dropped ) -
                                                current.lits().begin() );
            }
            else
                ++i;
        }
    }
    return current;
}

bool blocks( const Cube& c, const Formula& relative_to, const Formula& trans, const Formula& init,
             const CubeVocabulary& vocab )
{
    const Formula now = cube_formula( c, vocab.layout, vocab.current );
    if ( check_sat( bv_and( init, now ) ).sat )
        return false;
    const Formula next = cube_formula( c, vocab.layout, vocab.primed );
    return !check_sat( conj( { relative_to, bv_not( now ), trans, next } ) ).sat;
}

Cube generalize( const Cube& c, const Formula& relative_to, const Formula& trans, const Formula& init,
                 const CubeVocabulary& vocab )
{
    if ( !blocks( c, relative_to, trans, init, vocab ) )
        throw PreconditionError( "generalize: the cube's negation is not inductive relative to the frame" );
    const Cube out = drop_literals( c, [ & ]( const Cube& candidate ) -> std::optional< Cube > {
        if ( candidate.empty() || !blocks( candidate, relative_to, trans, init, vocab ) )
            return std::nullopt;
        return candidate;
    } );
    if ( !out.subsumes( c ) || !blocks( out, relative_to, trans, init, vocab ) )
        throw std::logic_error( "generalize: result failed re-verification" );
    return out;
}

} // namespace specfence::logic
