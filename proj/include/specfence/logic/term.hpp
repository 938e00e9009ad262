#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace specfence::logic
{

// Quantifier-free terms over fixed-width unsigned bit-vectors. Booleans are
// bit-vectors of width 1, so the boolean connectives are the bitwise ones.
enum class Op : std::uint8_t
{
    Const,
    Var,
    Not,
    And,
    Or,
    Xor,
    Add,
    Sub,
    Mul,
    Eq,
    Ult,
    Ule,
    Ite,
    Zext,
    Trunc,
    Extract,
};

constexpr unsigned max_width = 64;

constexpr std::uint64_t width_mask( unsigned width )
{
    return width >= 64 ? ~std::uint64_t{ 0 } : ( std::uint64_t{ 1 } << width ) - 1;
}

struct TermNode;

class Term
{
    std::shared_ptr< const TermNode > _node;

public:
    Term() = default;
    explicit Term( std::shared_ptr< const TermNode > node ) : _node{ std::move( node ) } {}

    [[nodiscard]] const TermNode& node() const { return *_node; }
    [[nodiscard]] const TermNode* get() const { return _node.get(); }
    [[nodiscard]] bool valid() const { return _node != nullptr; }

    [[nodiscard]] Op op() const;
    [[nodiscard]] unsigned width() const;
    [[nodiscard]] bool is_const() const;
    [[nodiscard]] bool is_true() const;
    [[nodiscard]] bool is_false() const;
    [[nodiscard]] std::uint64_t const_value() const;
    [[nodiscard]] const std::vector< Term >& args() const;

    friend bool operator==( const Term& a, const Term& b ) { return a._node == b._node; }
};

// Formulas are width-1 terms.
using Formula = Term;

struct TermNode
{
    Op op;
    unsigned width;
    // Const: the value. Var: the variable index. Extract: the bit position.
    std::uint64_t value = 0;
    // Var only.
    std::string name;
    std::vector< Term > args;
};

class TypeError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// Constructors. All of them fold constants and apply the obvious identities.
Term constant( std::uint64_t value, unsigned width );
Term variable( std::string name, unsigned width, std::size_t index );
Term bool_const( bool value );
inline Term tt() { return bool_const( true ); }
inline Term ff() { return bool_const( false ); }

Term bv_not( const Term& a );
Term bv_and( const Term& a, const Term& b );
Term bv_or( const Term& a, const Term& b );
Term bv_xor( const Term& a, const Term& b );
Term add( const Term& a, const Term& b );
Term sub( const Term& a, const Term& b );
Term mul( const Term& a, const Term& b );
Term eq( const Term& a, const Term& b );
Term ult( const Term& a, const Term& b );
Term ule( const Term& a, const Term& b );
Term ite( const Term& c, const Term& t, const Term& e );
Term zext( const Term& a, unsigned width );
Term trunc( const Term& a, unsigned width );
Term extract_bit( const Term& a, unsigned bit );

Formula implies( const Formula& a, const Formula& b );
Formula iff( const Formula& a, const Formula& b );
Formula conj( std::span< const Formula > fs );
Formula disj( std::span< const Formula > fs );
Formula conj( std::initializer_list< Formula > fs );
Formula disj( std::initializer_list< Formula > fs );

// Resizes to the given width by zero extension or truncation.
Term resize( const Term& a, unsigned width );

std::uint64_t evaluate( const Term& t, std::span< const std::uint64_t > env );

// Indices of every variable occurring in t.
std::vector< std::size_t > variables_of( const Term& t );
// Every distinct variable node occurring in t, ordered by index.
std::vector< Term > variable_nodes( const Term& t );

std::size_t dag_size( const Term& t );

// Rebuilds t with every variable replaced by the term returned for it; the
// replacement must keep the variable's width. Constants are folded again.
Term substitute( const Term& t, const std::function< Term( const TermNode& var ) >& replace );

// Rebuilds a node with new arguments through the folding constructors.
Term rebuild( const TermNode& node, std::vector< Term > args );

// S-expression rendering, for diagnostics.
std::string to_string( const Term& t );

} // namespace specfence::logic
