#include "mpsfin/io.hpp"

#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <system_error>
#include <vector>

#include "mpsfin/errors.hpp"

namespace mpsfin {

namespace {

void write_all(const std::filesystem::path& file, const std::string& content, bool binary) {
    std::ofstream out(file, binary ? std::ios::binary : std::ios::out);
    if (!out) throw IoError("cannot open '" + file.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("short write to '" + file.string() + "'");
}

template <typename T>
void put_raw(std::string& buf, T value) {
    char tmp[sizeof(T)];
    std::memcpy(tmp, &value, sizeof(T));
    buf.append(tmp, sizeof(T));
}

template <typename T>
T get_raw(const std::string& buf, std::size_t& pos, const char* field) {
    if (pos + sizeof(T) > buf.size())
        throw IoError(std::string("mps file: truncated while reading ") + field);
    T value;
    std::memcpy(&value, buf.data() + pos, sizeof(T));
    pos += sizeof(T);
    return value;
}

} // namespace

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void write_paths_csv(const std::filesystem::path& file, const PathSet& paths) {
    paths.validate();
    std::string out;
    out.reserve(paths.values.size() * 20 + 64);
    for (std::size_t c = 0; c < paths.n_cols; ++c) {
        if (c) out += ',';
        out += 't';
        out += std::to_string(paths.first_time_index + static_cast<int>(c));
    }
    out += '\n';
    for (std::size_t i = 0; i < paths.n_paths; ++i) {
        for (std::size_t c = 0; c < paths.n_cols; ++c) {
            if (c) out += ',';
            out += format_double(paths(i, c));
        }
        out += '\n';
    }
    write_all(file, out, false);
}

PathSet read_paths_csv(const std::filesystem::path& file, double dt) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open '" + file.string() + "'");
    std::string line;
    if (!std::getline(in, line)) throw IoError("'" + file.string() + "': missing header row");

    PathSet out;
    out.dt = dt;
    std::size_t n_cols = 0;
    {
        std::stringstream header(line);
        std::string field;
        int expected = -1;
        while (std::getline(header, field, ',')) {
            if (field.empty() || field[0] != 't')
                throw IoError("'" + file.string() + "': bad header field '" + field + "'");
            const int idx = std::stoi(field.substr(1));
            if (expected == -1) {
                if (idx != 0 && idx != 1)
                    throw IoError("'" + file.string() + "': header must start at t0 or t1");
                out.first_time_index = idx;
            } else if (idx != expected) {
                throw IoError("'" + file.string() + "': non-consecutive header field '" + field + "'");
            }
            expected = idx + 1;
            ++n_cols;
        }
    }
    if (n_cols == 0) throw IoError("'" + file.string() + "': empty header");
    out.n_cols = n_cols;

    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const char* p = line.data();
        const char* endp = p + line.size();
        std::size_t c = 0;
        while (c < n_cols) {
            double v = 0.0;
            const auto res = std::from_chars(p, endp, v);
            if (res.ec != std::errc())
                throw IoError("'" + file.string() + "': unparsable number in row " +
                              std::to_string(out.n_paths + 1));
            out.values.push_back(v);
            ++c;
            p = res.ptr;
            if (c < n_cols) {
                if (p >= endp || *p != ',')
                    throw IoError("'" + file.string() + "': row " + std::to_string(out.n_paths + 1) +
                                  " has fewer than " + std::to_string(n_cols) + " columns");
                ++p;
            }
        }
        if (p != endp)
            throw IoError("'" + file.string() + "': trailing characters in row " +
                          std::to_string(out.n_paths + 1));
        ++out.n_paths;
    }
    out.validate();
    return out;
}

void write_mps(const std::filesystem::path& file, const Mps& mps) {
    mps.validate();
    std::string buf;
    buf += "MPS1";
    put_raw<std::uint32_t>(buf, 1);
    put_raw<std::uint32_t>(buf, static_cast<std::uint32_t>(mps.n_sites()));
    put_raw<std::uint32_t>(buf, mps.disc.m);
    put_raw<double>(buf, mps.disc.x_min);
    put_raw<double>(buf, mps.disc.x_max);
    for (const std::size_t d : mps.bond_dims()) put_raw<std::uint32_t>(buf, static_cast<std::uint32_t>(d));
    for (const auto& site : mps.sites)
        for (const double v : site.a) put_raw<double>(buf, v);
    write_all(file, buf, true);
}

Mps read_mps(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("cannot open '" + file.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string buf = ss.str();

    std::size_t pos = 0;
    if (buf.size() < 4 || buf.compare(0, 4, "MPS1") != 0)
        throw IoError("mps file: bad magic, expected \"MPS1\"");
    pos = 4;
    const auto version = get_raw<std::uint32_t>(buf, pos, "version");
    if (version != 1) throw IoError("mps file: unsupported version " + std::to_string(version));
    const auto n_sites = get_raw<std::uint32_t>(buf, pos, "M");
    if (n_sites < 1) throw IoError("mps file: M must be at least 1");
    const auto m = get_raw<std::uint32_t>(buf, pos, "m");
    if (m < 1 || m > 16) throw IoError("mps file: m = " + std::to_string(m) + " outside [1, 16]");
    const double x_min = get_raw<double>(buf, pos, "x_min");
    const double x_max = get_raw<double>(buf, pos, "x_max");
    if (!(x_max > x_min)) throw IoError("mps file: x_max must exceed x_min");

    std::vector<std::uint32_t> bonds(n_sites + 1);
    for (std::uint32_t i = 0; i <= n_sites; ++i)
        bonds[i] = get_raw<std::uint32_t>(buf, pos, "bond_dims");
    if (bonds.front() != 1 || bonds.back() != 1)
        throw IoError("mps file: bond_dims[0] and bond_dims[M] must be 1");
    for (const std::uint32_t d : bonds)
        if (d < 1) throw IoError("mps file: zero bond dimension");

    Mps mps;
    mps.disc = DiscretizationMap{x_min, x_max, m};
    const std::size_t phys = std::size_t(1) << m;
    for (std::uint32_t j = 0; j < n_sites; ++j) {
        SiteTensor t(bonds[j], phys, bonds[j + 1]);
        for (double& v : t.a) v = get_raw<double>(buf, pos, "tensor body");
        mps.sites.push_back(std::move(t));
    }
    if (pos != buf.size()) throw IoError("mps file: trailing bytes after tensor body");
    mps.validate();
    return mps;
}

void write_json(const std::filesystem::path& file, const nlohmann::json& j) {
    write_all(file, j.dump(2) + "\n", false);
}

nlohmann::json read_json(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open '" + file.string() + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("'" + file.string() + "': " + e.what());
    }
}

} // namespace mpsfin
