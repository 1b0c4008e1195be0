#include "subjgen/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include "subjgen/errors.hpp"

namespace subjgen {

namespace {

constexpr char magic[8] = {'S', 'J', 'G', 'C', 'K', 'P', 'T', '\0'};

void put_u32(std::ostream& out, uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 4);
}

void put_u64(std::ostream& out, uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 8);
}

uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw format_error("checkpoint: truncated file");
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
}

uint64_t get_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw format_error("checkpoint: truncated file");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

uint64_t double_bits(double d) {
    uint64_t u;
    std::memcpy(&u, &d, 8);
    return u;
}

double bits_double(uint64_t u) {
    double d;
    std::memcpy(&d, &u, 8);
    return d;
}

}  // namespace

void save_checkpoint(const std::string& path, const std::vector<const ad::Parameter*>& params,
                     uint64_t seed) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write checkpoint: " + path);
    out.write(magic, 8);
    put_u32(out, 1);
    put_u64(out, seed);
    put_u32(out, static_cast<uint32_t>(params.size()));
    for (const ad::Parameter* p : params) {
        put_u32(out, static_cast<uint32_t>(p->name.size()));
        out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        put_u32(out, static_cast<uint32_t>(p->value.shape().size()));
        for (int d : p->value.shape()) put_u32(out, static_cast<uint32_t>(d));
        for (size_t i = 0; i < p->value.size(); ++i) put_u64(out, double_bits(p->value[i]));
    }
    if (!out) throw io_error("write failed: " + path);
}

void save_checkpoint(const std::string& path, const std::vector<ad::Parameter*>& params,
                     uint64_t seed) {
    std::vector<const ad::Parameter*> view(params.begin(), params.end());
    save_checkpoint(path, view, seed);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open checkpoint: " + path);
    char m[8];
    in.read(m, 8);
    if (!in || std::memcmp(m, magic, 8) != 0)
        throw format_error("checkpoint " + path + ": bad magic");
    Checkpoint ckpt;
    ckpt.version = get_u32(in);
    if (ckpt.version != 1)
        throw format_error("checkpoint " + path + ": unsupported version " +
                           std::to_string(ckpt.version));
    ckpt.seed = get_u64(in);
    uint32_t count = get_u32(in);
    for (uint32_t k = 0; k < count; ++k) {
        uint32_t name_len = get_u32(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (!in) throw format_error("checkpoint: truncated name");
        uint32_t ndim = get_u32(in);
        std::vector<int> shape;
        size_t numel = 1;
        for (uint32_t d = 0; d < ndim; ++d) {
            shape.push_back(static_cast<int>(get_u32(in)));
            numel *= static_cast<size_t>(shape.back());
        }
        std::vector<double> data(numel);
        for (size_t i = 0; i < numel; ++i) data[i] = bits_double(get_u64(in));
        ckpt.entries.emplace_back(std::move(name), ad::Tensor(std::move(shape), std::move(data)));
    }
    return ckpt;
}

void restore_parameters(const Checkpoint& ckpt, const std::vector<ad::Parameter*>& params) {
    std::map<std::string, const ad::Tensor*> by_name;
    for (const auto& [name, tensor] : ckpt.entries) by_name[name] = &tensor;
    for (ad::Parameter* p : params) {
        auto it = by_name.find(p->name);
        if (it == by_name.end())
            throw format_error("checkpoint: missing parameter " + p->name);
        if (!it->second->same_shape(p->value))
            throw format_error("checkpoint: parameter " + p->name + " has shape " +
                               it->second->shape_str() + ", expected " + p->value.shape_str());
        p->value = *it->second;
        p->zero_grad();
    }
}

uint64_t file_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open file for hashing: " + path);
    uint64_t h = 0xcbf29ce484222325ull;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ull;
        }
        if (!in) break;
    }
    return h;
}

}  // namespace subjgen
