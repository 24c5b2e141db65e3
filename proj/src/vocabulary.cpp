#include "oikg/vocabulary.hpp"

#include <array>
#include <stdexcept>
#include <string>

namespace oikg::vocab {

namespace {

constexpr std::array<std::string_view, 3> kSpecial = {"<pad>", "<bos>", "<eos>"};

constexpr std::array<std::string_view, kRoomCount> kRooms = {
    "kitchen", "hallway", "bedroom", "bathroom", "lounge", "office", "dining", "laundry"};

constexpr std::array<std::string_view, kObjectCount> kObjects = {
    "lamp", "sofa", "table", "plant", "piano", "mirror", "painting", "fridge"};

constexpr std::array<std::string_view, 40> kOther = {
    "walk",  "go",     "head",    "move",     "continue", "proceed", "pass",  "through",
    "the",   "then",   "and",     "into",     "past",     "toward",  "stop",  "wait",
    "halt",  "near",   "by",      "next",     "to",       "at",      "enter", "exit",
    "turn",  "left",   "right",   "straight", "along",    "until",   "you",   "reach",
    "a",     "from",   "out",     "of",       "in",       "room",    "area",  "finally"};

std::string_view lookup(int id) {
    if (id < 0) {
        throw std::invalid_argument("vocabulary: negative token id");
    }
    auto i = static_cast<std::size_t>(id);
    if (i < kSpecial.size()) return kSpecial[i];
    i -= kSpecial.size();
    if (i < kRooms.size()) return kRooms[i];
    i -= kRooms.size();
    if (i < kObjects.size()) return kObjects[i];
    i -= kObjects.size();
    if (i < kOther.size()) return kOther[i];
    throw std::invalid_argument("vocabulary: token id " + std::to_string(id) + " out of range");
}

}  // namespace

std::size_t size() { return kSpecial.size() + kRooms.size() + kObjects.size() + kOther.size(); }

std::string_view word(int id) { return lookup(id); }

TokenClass token_class(int id) {
    lookup(id);
    if (id >= kFirstRoom && id < kFirstObject) return TokenClass::Room;
    if (id >= kFirstObject && id < kFirstOther) return TokenClass::Object;
    return TokenClass::Other;
}

std::optional<int> find(std::string_view w) {
    for (int id = 0; id < static_cast<int>(size()); ++id) {
        if (lookup(id) == w) {
            return id;
        }
    }
    return std::nullopt;
}

int room_token(int room) {
    if (room < 0 || room >= kRoomCount) {
        throw std::invalid_argument("vocabulary: room index out of range");
    }
    return kFirstRoom + room;
}

int object_token(int object) {
    if (object < 0 || object >= kObjectCount) {
        throw std::invalid_argument("vocabulary: object index out of range");
    }
    return kFirstObject + object;
}

std::string_view room_name(int room) { return word(room_token(room)); }
std::string_view object_name(int object) { return word(object_token(object)); }

}  // namespace oikg::vocab
