#include "specfence/certificate/sexpr.hpp"

#include <cctype>

namespace specfence::certificate
{

namespace
{

class Reader
{
    std::string_view _text;
    std::size_t _pos = 0;
    int _line = 1;

public:
    explicit Reader( std::string_view text ) : _text{ text } {}

    [[noreturn]] void fail( const std::string& message ) const
    {
        throw ParseError( "line " + std::to_string( _line ) + ": " + message );
    }

    // Skips blanks; returns a comment if one starts the next line content.
    bool skip_blanks()
    {
        while ( _pos < _text.size() && std::isspace( static_cast< unsigned char >( _text[ _pos ] ) ) )
        {
            if ( _text[ _pos ] == '\n' )
                ++_line;
            ++_pos;
        }
        return _pos < _text.size();
    }

    std::string comment()
    {
        ++_pos;
        const auto end = _text.find( '\n', _pos );
        const auto stop = end == std::string_view::npos ? _text.size() : end;
        std::string out( _text.substr( _pos, stop - _pos ) );
        _pos = stop;
        return out;
    }

    bool at_comment() const { return _pos < _text.size() && _text[ _pos ] == ';'; }

    SExpr expr()
    {
        for ( ;; )
        {
            if ( !skip_blanks() )
                fail( "unexpected end of input" );
            if ( !at_comment() )
                break;
            comment();
        }
        const char c = _text[ _pos ];
        if ( c == ')' )
            fail( "unexpected ')'" );
        if ( c == '(' )
        {
            ++_pos;
            std::vector< SExpr > items;
            for ( ;; )
            {
                if ( !skip_blanks() )
                    fail( "unterminated list" );
                if ( at_comment() )
                {
                    comment();
                    continue;
                }
                if ( _text[ _pos ] == ')' )
                {
                    ++_pos;
                    return SExpr( std::move( items ) );
                }
                items.push_back( expr() );
            }
        }
        if ( c == '|' )
        {
            const auto end = _text.find( '|', _pos + 1 );
            if ( end == std::string_view::npos )
                fail( "unterminated quoted symbol" );
            SExpr out( std::string( _text.substr( _pos, end + 1 - _pos ) ) );
            _pos = end + 1;
            return out;
        }
        if ( c == '"' )
        {
            std::size_t end = _pos + 1;
            while ( end < _text.size() && !( _text[ end ] == '"' && ( end + 1 >= _text.size() || _text[ end + 1 ] != '"' ) ) )
                end += _text[ end ] == '"' ? 2 : 1;
            if ( end >= _text.size() )
                fail( "unterminated string" );
            SExpr out( std::string( _text.substr( _pos, end + 1 - _pos ) ) );
            _pos = end + 1;
            return out;
        }
        const std::size_t start = _pos;
        while ( _pos < _text.size() && !std::isspace( static_cast< unsigned char >( _text[ _pos ] ) ) &&
                _text[ _pos ] != '(' && _text[ _pos ] != ')' && _text[ _pos ] != ';' )
            ++_pos;
        return SExpr( std::string( _text.substr( start, _pos - start ) ) );
    }

    Script script()
    {
        Script s;
        while ( skip_blanks() )
        {
            if ( at_comment() )
                s.items.emplace_back( Comment{ comment() } );
            else
            {
                if ( _text[ _pos ] != '(' )
                    fail( "expected a command" );
                s.items.emplace_back( expr() );
            }
        }
        return s;
    }
};

void print_into( const SExpr& e, std::string& out )
{
    if ( e.is_atom() )
    {
        out += e.atom;
        return;
    }
    out += '(';
    for ( std::size_t i = 0; i < e.list.size(); ++i )
    {
        if ( i )
            out += ' ';
        print_into( e.list[ i ], out );
    }
    out += ')';
}

} // namespace

Script parse_script( std::string_view text ) { return Reader( text ).script(); }

std::string print_sexpr( const SExpr& e )
{
    std::string out;
    print_into( e, out );
    return out;
}

std::string print_script( const Script& s )
{
    std::string out;
    for ( const auto& item : s.items )
    {
        if ( const auto* c = std::get_if< Comment >( &item ) )
            out += ";" + c->text;
        else
            print_into( std::get< SExpr >( item ), out );
        out += '\n';
    }
    return out;
}

} // namespace specfence::certificate
