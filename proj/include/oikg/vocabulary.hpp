#pragma once

#include <cstddef>
#include <optional>
#include <string_view>

namespace oikg::vocab {

// Fixed token table: PAD/BOS/EOS, 8 room names, 8 object names and a set of
// structural words. Ids are stable; they are written into episode files.

enum class TokenClass { Room, Object, Other };

inline constexpr int kPad = 0;
inline constexpr int kBos = 1;
inline constexpr int kEos = 2;
inline constexpr int kRoomCount = 8;
inline constexpr int kObjectCount = 8;
inline constexpr int kFirstRoom = 3;
inline constexpr int kFirstObject = kFirstRoom + kRoomCount;
inline constexpr int kFirstOther = kFirstObject + kObjectCount;

std::size_t size();
std::string_view word(int id);
TokenClass token_class(int id);
std::optional<int> find(std::string_view word);

int room_token(int room);
int object_token(int object);
std::string_view room_name(int room);
std::string_view object_name(int object);

}  // namespace oikg::vocab
