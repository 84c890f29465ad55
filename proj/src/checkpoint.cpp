#include "psae/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "psae/common.hpp"

namespace psae {

namespace {

constexpr char kMagic[4] = {'P', 'S', 'A', 'E'};
constexpr uint32_t kVersionCur = 1;

template <typename T>
void put(std::string& buf, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    char raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    buf.append(raw, sizeof(T));
}

struct Cursor {
    const std::string& buf;
    size_t pos = 0;

    template <typename T>
    T take() {
        if (pos + sizeof(T) > buf.size()) throw Error("truncated checkpoint");
        T v;
        std::memcpy(&v, buf.data() + pos, sizeof(T));
        pos += sizeof(T);
        return v;
    }
    std::string take_bytes(size_t n) {
        if (pos + n > buf.size()) throw Error("truncated checkpoint");
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

}  // namespace

const Tensor& Checkpoint::find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return t;
    throw Error(concat("checkpoint has no tensor named '", name, "'"));
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    std::string buf;
    buf.append(kMagic, 4);
    put(buf, ckpt.version);
    put(buf, ckpt.config_hash);
    put(buf, ckpt.seed);
    put(buf, ckpt.sample_counter);
    put(buf, ckpt.epoch);
    put(buf, ckpt.adam_t);
    put(buf, static_cast<uint32_t>(ckpt.config_toml.size()));
    buf.append(ckpt.config_toml);

    put(buf, static_cast<uint32_t>(ckpt.tensors.size()));
    for (const auto& [name, t] : ckpt.tensors) {
        if (!t.defined()) throw Error(concat("tensor '", name, "' is undefined"));
        if (name.size() > 0xFFFF) throw Error(concat("tensor name too long: ", name));
        put(buf, static_cast<uint16_t>(name.size()));
        buf.append(name);
        put(buf, static_cast<uint8_t>(0));  // dtype f32
        put(buf, static_cast<uint8_t>(t.ndim()));
        for (int64_t d : t.shape()) put(buf, d);
    }
    for (const auto& nt : ckpt.tensors)
        buf.append(reinterpret_cast<const char*>(nt.second.data()),
                   static_cast<size_t>(nt.second.size()) * sizeof(float));

    put(buf, crc32(buf.data(), buf.size()));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(concat("cannot write checkpoint ", path.string()));
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw Error(concat("short write to ", path.string()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(concat("cannot open checkpoint ", path.string()));
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (buf.size() < 4 + sizeof(uint32_t) || std::memcmp(buf.data(), kMagic, 4) != 0)
        throw Error(concat(path.string(), " is not a checkpoint (bad magic)"));
    const size_t body = buf.size() - sizeof(uint32_t);
    uint32_t stored_crc;
    std::memcpy(&stored_crc, buf.data() + body, sizeof(uint32_t));
    if (crc32(buf.data(), body) != stored_crc)
        throw Error(concat(path.string(), ": checksum mismatch (truncated or corrupt)"));

    Cursor c{buf, 4};
    Checkpoint ckpt;
    ckpt.version = c.take<uint32_t>();
    if (ckpt.version != kVersionCur)
        throw Error(concat(path.string(), ": format version ", ckpt.version, ", expected ",
                           kVersionCur));
    ckpt.config_hash = c.take<uint64_t>();
    ckpt.seed = c.take<uint64_t>();
    ckpt.sample_counter = c.take<uint64_t>();
    ckpt.epoch = c.take<uint32_t>();
    ckpt.adam_t = c.take<int64_t>();
    ckpt.config_toml = c.take_bytes(c.take<uint32_t>());

    const uint32_t count = c.take<uint32_t>();
    std::vector<Shape> shapes;
    for (uint32_t i = 0; i < count; ++i) {
        std::string name = c.take_bytes(c.take<uint16_t>());
        const uint8_t dtype = c.take<uint8_t>();
        if (dtype != 0) throw Error(concat("tensor '", name, "': unknown dtype ", int(dtype)));
        const uint8_t ndim = c.take<uint8_t>();
        Shape shape;
        for (uint8_t d = 0; d < ndim; ++d) shape.push_back(c.take<int64_t>());
        shapes.push_back(shape);
        ckpt.tensors.emplace_back(std::move(name), Tensor());
    }
    for (uint32_t i = 0; i < count; ++i) {
        Tensor t = shapes[i].empty() ? Tensor::zeros(Shape{}) : Tensor::zeros(shapes[i]);
        const size_t bytes = static_cast<size_t>(t.size()) * sizeof(float);
        if (c.pos + bytes > body) throw Error("truncated checkpoint");
        std::memcpy(t.data(), buf.data() + c.pos, bytes);
        c.pos += bytes;
        ckpt.tensors[i].second = std::move(t);
    }
    if (c.pos != body)
        throw Error(concat(path.string(), ": ", body - c.pos, " unparsed trailing bytes"));
    return ckpt;
}

}  // namespace psae
