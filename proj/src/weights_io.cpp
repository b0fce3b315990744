#include "vaereg/weights_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "vaereg/errors.hpp"

namespace vaereg {

namespace {

constexpr char kMagic[] = "VAEREG1\n";
constexpr std::size_t kMagicLen = 8;

static_assert(std::endian::native == std::endian::little,
              "tensor container assumes a little-endian host");

void write_u64(std::ofstream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint64_t read_u64(std::ifstream& in, const std::string& path) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw IoError("truncated tensor file: " + path);
    return v;
}

}  // namespace

void save_tensors(const std::string& path, const NamedTensors& tensors) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for write: " + path);
    out.write(kMagic, kMagicLen);
    for (const auto& [name, tensor] : tensors) {
        write_u64(out, name.size());
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u64(out, tensor.shape.size());
        for (const std::size_t d : tensor.shape) write_u64(out, d);
        out.write(reinterpret_cast<const char*>(tensor.data.data()),
                  static_cast<std::streamsize>(tensor.data.size() * sizeof(double)));
    }
    if (!out) throw IoError("write failed: " + path);
}

NamedTensors load_tensors(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    char magic[kMagicLen];
    in.read(magic, kMagicLen);
    if (!in || std::memcmp(magic, kMagic, kMagicLen) != 0)
        throw IoError("bad magic, not a tensor container: " + path);

    NamedTensors tensors;
    while (true) {
        std::uint64_t name_len = 0;
        in.read(reinterpret_cast<char*>(&name_len), sizeof name_len);
        if (in.eof()) break;
        if (!in) throw IoError("truncated tensor file: " + path);
        if (name_len > (1u << 20)) throw IoError("implausible tensor name length: " + path);
        std::string name(name_len, '\0');
        in.read(name.data(), static_cast<std::streamsize>(name_len));
        if (!in) throw IoError("truncated tensor file: " + path);

        const std::uint64_t rank = read_u64(in, path);
        if (rank > 8) throw IoError("implausible tensor rank in: " + path);
        std::vector<std::size_t> shape(rank);
        std::size_t numel = 1;
        for (std::uint64_t i = 0; i < rank; ++i) {
            const std::uint64_t d = read_u64(in, path);
            if (d == 0 || numel > (1ull << 32) / (d ? d : 1))
                throw IoError("invalid tensor shape in: " + path);
            shape[i] = static_cast<std::size_t>(d);
            numel *= shape[i];
        }
        std::vector<double> data(numel);
        in.read(reinterpret_cast<char*>(data.data()),
                static_cast<std::streamsize>(numel * sizeof(double)));
        if (!in) throw IoError("truncated tensor data in: " + path);
        tensors.emplace_back(std::move(name), Tensor{std::move(shape), std::move(data)});
    }
    return tensors;
}

}  // namespace vaereg
