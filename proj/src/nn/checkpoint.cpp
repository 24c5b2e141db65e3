#include "oikg/nn/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "oikg/env_io.hpp"
#include "oikg/errors.hpp"

namespace oikg::nn {

namespace {

constexpr std::string_view kMagic = "OIKG0001";

template <typename T>
void put(std::string& out, T v) {
    static_assert(std::endian::native == std::endian::little, "checkpoint writer assumes a little-endian host");
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

class Reader {
public:
    explicit Reader(const std::string& bytes) : bytes_(bytes) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }

    std::string get_string(std::size_t n) {
        need(n);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) {
            throw SchemaError("checkpoint truncated at byte " + std::to_string(pos_));
        }
    }

    const std::string& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const ParamStore& store) {
    std::string out(kMagic);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(store.size()));
    for (const std::string& name : store.names()) {
        const Tensor& t = store.get(name);
        put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
        for (std::size_t d : t.shape()) put<std::uint64_t>(out, d);
        for (double v : t.values()) put<double>(out, v);
    }
    return out;
}

std::map<std::string, Tensor> decode_checkpoint(const std::string& bytes) {
    if (bytes.compare(0, kMagic.size(), kMagic) != 0) {
        throw SchemaError("checkpoint: bad magic bytes");
    }
    Reader r(bytes);
    r.get_string(kMagic.size());
    const auto count = r.get<std::uint32_t>();
    std::map<std::string, Tensor> out;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = r.get<std::uint32_t>();
        std::string name = r.get_string(name_len);
        const auto rank = r.get<std::uint32_t>();
        if (rank > 2) throw SchemaError("checkpoint: block '" + name + "' has rank " + std::to_string(rank));
        Shape shape;
        for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(static_cast<std::size_t>(r.get<std::uint64_t>()));
        std::vector<double> values(numel(shape));
        for (auto& v : values) v = r.get<double>();
        if (!out.emplace(name, Tensor::from(shape, std::move(values))).second) {
            throw SchemaError("checkpoint: duplicate block '" + name + "'");
        }
    }
    if (!r.done()) throw SchemaError("checkpoint: trailing bytes after last block");
    return out;
}

void save_checkpoint(const ParamStore& store, const std::filesystem::path& path) {
    io::write_file(path, encode_checkpoint(store));
}

std::map<std::string, Tensor> read_checkpoint(const std::filesystem::path& path) {
    try {
        return decode_checkpoint(io::read_file(path));
    } catch (const SchemaError& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
}

void load_checkpoint(ParamStore& store, const std::filesystem::path& path) {
    store.assign_values(read_checkpoint(path));
}

}  // namespace oikg::nn
