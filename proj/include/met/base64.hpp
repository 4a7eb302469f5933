#ifndef MET_BASE64_HPP
#define MET_BASE64_HPP

#include <optional>
#include <string>
#include <string_view>

namespace met {

// Standard base64 (RFC 4648, with '=' padding). Used for event payloads
// inside JSON bodies.
std::string base64_encode(std::string_view bytes);

// Returns nullopt on any character outside the alphabet or bad padding.
std::optional<std::string> base64_decode(std::string_view text);

}  // namespace met

#endif  // MET_BASE64_HPP
