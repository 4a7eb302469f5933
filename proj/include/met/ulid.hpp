#ifndef MET_ULID_HPP
#define MET_ULID_HPP

#include <string>

namespace met {

// Lexicographically sortable unique id: 48-bit millisecond timestamp plus
// 80 bits of entropy, Crockford base32, 26 characters. Ids generated within
// the same millisecond by one process are strictly increasing.
std::string new_ulid();

}  // namespace met

#endif  // MET_ULID_HPP
