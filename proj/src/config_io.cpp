#include <charconv>
#include <fstream>
#include <sstream>

#include "netlattice/core.hpp"
#include "netlattice/format.hpp"

namespace netlattice {

std::string format_double(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

std::string format_shortest(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

std::string_view trim(std::string_view s) {
    const char* ws = " \t\r\n";
    auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(s.substr(start));
            break;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

namespace {

template <typename T>
T parse_number(std::string_view s, const char* what) {
    s = trim(s);
    T value{};
    auto res = std::from_chars(s.data(), s.data() + s.size(), value);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw Error(ErrorCode::ParseError, std::string("bad ") + what + " '" + std::string(s) + "'");
    return value;
}

}  // namespace

double parse_double(std::string_view s) { return parse_number<double>(s, "number"); }
std::int64_t parse_int(std::string_view s) { return parse_number<std::int64_t>(s, "integer"); }
std::uint64_t parse_uint(std::string_view s) { return parse_number<std::uint64_t>(s, "unsigned integer"); }

std::vector<double> parse_double_list(std::string_view s) {
    std::vector<double> out;
    for (auto item : split(s, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(parse_double(item));
    }
    return out;
}

std::string to_config_text(const ConfigCandidate& c) {
    std::ostringstream os;
    os << "width = " << c.width << '\n'
       << "depth = " << c.depth << '\n'
       << "weight_variance = " << format_double(c.weight_variance) << '\n'
       << "bias_variance = " << format_double(c.bias_variance) << '\n'
       << "activation = " << to_string(c.activation) << '\n'
       << "num_samples = " << c.num_samples << '\n'
       << "master_seed = " << c.master_seed << '\n'
       << "window_start = " << c.window_start << '\n'
       << "window_len = " << c.window_len << '\n';
    return os.str();
}

void set_config_value(ConfigCandidate& c, std::string_view key, std::string_view value) {
    key = trim(key);
    value = trim(value);
    if (key == "width") c.width = parse_int(value);
    else if (key == "depth") c.depth = parse_int(value);
    else if (key == "weight_variance") c.weight_variance = parse_double(value);
    else if (key == "bias_variance") c.bias_variance = parse_double(value);
    else if (key == "activation") {
        auto a = parse_activation(value);
        if (!a) throw Error(ErrorCode::ParseError, "unknown activation '" + std::string(value) + "'");
        c.activation = *a;
    } else if (key == "num_samples") c.num_samples = parse_int(value);
    else if (key == "master_seed") c.master_seed = parse_uint(value);
    else if (key == "window_start") c.window_start = parse_int(value);
    else if (key == "window_len") c.window_len = parse_int(value);
    else throw Error(ErrorCode::ParseError, "unknown config key '" + std::string(key) + "'");
}

ConfigCandidate parse_config_text(std::string_view text, ConfigCandidate base) {
    std::size_t lineno = 0;
    for (auto line : split(text, '\n')) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw Error(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": expected key = value");
        set_config_value(base, line.substr(0, eq), line.substr(eq + 1));
    }
    return base;
}

ConfigCandidate load_config_file(const std::string& path, ConfigCandidate base) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), base);
}

}  // namespace netlattice
