#include "vsod/harness/checkpoint.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace vsod::harness {

namespace {

constexpr std::array<char, 8> kMagic{'V', 'S', 'O', 'D', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

class Writer {
public:
    template <typename T>
    void pod(const T& v) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
        buf_.insert(buf_.end(), p, p + sizeof(T));
    }
    void str(const std::string& s) {
        pod<std::uint64_t>(s.size());
        buf_.insert(buf_.end(), s.begin(), s.end());
    }
    void tensor(const Tensor& t) {
        const Shape s = t.shape();
        pod<std::int32_t>(s.n);
        pod<std::int32_t>(s.c);
        pod<std::int32_t>(s.h);
        pod<std::int32_t>(s.w);
        const auto* p = reinterpret_cast<const std::uint8_t*>(t.data());
        buf_.insert(buf_.end(), p, p + t.size() * sizeof(double));
    }
    std::vector<std::uint8_t> take() { return std::move(buf_); }

private:
    std::vector<std::uint8_t> buf_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}

    template <typename T>
    T pod() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::string str() {
        const auto n = pod<std::uint64_t>();
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    Tensor tensor() {
        Shape s;
        s.n = pod<std::int32_t>();
        s.c = pod<std::int32_t>();
        s.h = pod<std::int32_t>();
        s.w = pod<std::int32_t>();
        if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0) throw std::runtime_error("checkpoint: corrupt tensor shape");
        need(s.numel() * sizeof(double));
        std::vector<double> data(s.numel());
        std::memcpy(data.data(), bytes_.data() + pos_, data.size() * sizeof(double));
        pos_ += data.size() * sizeof(double);
        return Tensor(s, std::move(data));
    }
    [[nodiscard]] bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (pos_ + n > bytes_.size()) throw std::runtime_error("checkpoint: truncated file");
    }
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize(const Checkpoint& ckpt) {
    Writer w;
    for (char c : kMagic) w.pod(c);
    w.pod(kVersion);
    w.str(to_json(ckpt.config));
    w.pod<std::int64_t>(ckpt.step);
    w.str(ckpt.rng_state);
    w.pod<std::uint64_t>(ckpt.parameters.size());
    for (const auto& [name, t] : ckpt.parameters) {
        w.str(name);
        w.tensor(t);
    }
    w.pod<std::int64_t>(ckpt.adam_steps);
    w.pod<std::uint64_t>(ckpt.adam_state.size());
    for (const auto& [name, mom] : ckpt.adam_state) {
        w.str(name);
        w.tensor(mom.m);
        w.tensor(mom.v);
    }
    return w.take();
}

Checkpoint deserialize(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    for (char c : kMagic) {
        if (r.pod<char>() != c) throw std::runtime_error("checkpoint: bad magic");
    }
    if (r.pod<std::uint32_t>() != kVersion) throw std::runtime_error("checkpoint: unsupported version");
    Checkpoint ck;
    ck.config = config_from_json(r.str());
    ck.step = r.pod<std::int64_t>();
    ck.rng_state = r.str();
    const auto np = r.pod<std::uint64_t>();
    for (std::uint64_t i = 0; i < np; ++i) {
        std::string name = r.str();
        ck.parameters.emplace(std::move(name), r.tensor());
    }
    ck.adam_steps = r.pod<std::int64_t>();
    const auto na = r.pod<std::uint64_t>();
    for (std::uint64_t i = 0; i < na; ++i) {
        std::string name = r.str();
        Tensor m = r.tensor();
        Tensor v = r.tensor();
        ck.adam_state.emplace(std::move(name), Adam::Moments{std::move(m), std::move(v)});
    }
    if (!r.done()) throw std::runtime_error("checkpoint: trailing bytes");
    return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    const auto bytes = serialize(ckpt);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = path.string() + ".tmp." + std::to_string(::getpid());
    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (fd < 0) throw std::runtime_error("cannot create " + tmp + ": " + std::strerror(errno));
    std::size_t written = 0;
    while (written < bytes.size()) {
        const ssize_t n = ::write(fd, bytes.data() + written, bytes.size() - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            const int err = errno;
            ::close(fd);
            ::unlink(tmp.c_str());
            throw std::runtime_error("write failed for " + tmp + ": " + std::strerror(err));
        }
        written += static_cast<std::size_t>(n);
    }
    if (::fsync(fd) != 0 || ::close(fd) != 0) {
        ::unlink(tmp.c_str());
        throw std::runtime_error("cannot flush " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize(bytes);
}

}  // namespace vsod::harness
