#ifndef TRIPMEM_TEXT_HPP
#define TRIPMEM_TEXT_HPP

#include <cstdint>
#include <string>
#include <string_view>

namespace tripmem {

// Canonical text form used for name identity and for embedding input:
// trims outer whitespace, collapses internal whitespace runs to a single
// space and lower-cases ASCII letters. Non-ASCII bytes pass through
// unchanged (input is assumed to be composed UTF-8).
std::string normalize_text(std::string_view text);

// True when the text is empty after normalization.
bool is_blank(std::string_view text);

// 64-bit FNV-1a over the raw bytes. Used for context hashing in generator
// scripts and for snapshot/config fingerprints; stable across platforms.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 14695981039346656037ull);

// splitmix64 finalizer, used for seed scrambling.
std::uint64_t mix64(std::uint64_t value);

// Hex form of a 64-bit hash (16 lowercase digits) and its inverse.
std::string hash_to_hex(std::uint64_t value);
std::uint64_t hex_to_hash(std::string_view hex);

}  // namespace tripmem

#endif  // TRIPMEM_TEXT_HPP
