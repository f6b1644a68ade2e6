#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include <zlib.h>

namespace telesift {

// Tags recorded in a candidate's transform chain, in the order applied.
namespace transform {
inline constexpr const char* hex_recover = "hex-recover";
inline constexpr const char* charset_utf16le = "charset:utf-16le";
inline constexpr const char* charset_utf16be = "charset:utf-16be";
inline constexpr const char* url = "url";
inline constexpr const char* html_entity = "html-entity";
inline constexpr const char* escape = "escape";
inline constexpr const char* placeholder_collapse = "placeholder-collapse";
inline constexpr const char* base64 = "base64";
inline constexpr const char* gunzip = "gunzip";
inline constexpr const char* inflate = "inflate";
}  // namespace transform

struct DecodeConfig {
    int max_depth = 5;                 // decode layers per candidate chain
    int placeholder_iterations = 16;   // fixpoint bound for lookup collapsing
    std::size_t base64_min_run = 16;   // shorter runs explode false positives
    double hex_min_density = 0.9;      // hex-digit share needed to try hex recovery
    double jndi_weight = 2.0;
    double ldap_weight = 1.0;
    double valid_text_ratio = 0.8;     // candidate counts as "valid text" above this
    std::size_t max_candidates = 256;
    std::size_t max_inflate_bytes = 4u << 20;
};

struct DecodeCandidate {
    std::string text;
    std::vector<std::string> transform_chain;
    double printable_ratio = 0.0;
    double score = 0.0;
    bool parse_loss = false;  // tolerant hex recovery dropped bytes
};

struct DecodedPayload {
    std::string raw;
    std::vector<DecodeCandidate> candidates;  // generation order; [0] is the raw view
    std::size_t best = 0;                     // index of the highest-scoring candidate
    int valid_transform_count = 0;
    std::size_t byte_length = 0;

    const DecodeCandidate& best_candidate() const { return candidates[best]; }
};

inline double printable_ratio(std::string_view text) {
    if (text.empty()) return 0.0;
    std::size_t printable = 0;
    for (unsigned char c : text)
        if ((c >= 0x20 && c <= 0x7E) || c == '\t' || c == '\n' || c == '\r') ++printable;
    return double(printable) / double(text.size());
}

namespace detail {

inline bool is_hex_digit(unsigned char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F');
}

inline int hex_value(unsigned char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

inline bool is_sep_ignored(unsigned char c) {
    return c == ':' || std::isspace(c);
}

inline void encode_utf8(std::uint32_t cp, std::string& out) {
    if (cp < 0x80) {
        out += char(cp);
    } else if (cp < 0x800) {
        out += char(0xC0 | (cp >> 6));
        out += char(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += char(0xE0 | (cp >> 12));
        out += char(0x80 | ((cp >> 6) & 0x3F));
        out += char(0x80 | (cp & 0x3F));
    } else {
        out += char(0xF0 | (cp >> 18));
        out += char(0x80 | ((cp >> 12) & 0x3F));
        out += char(0x80 | ((cp >> 6) & 0x3F));
        out += char(0x80 | (cp & 0x3F));
    }
}

inline bool contains_ci(std::string_view haystack, std::string_view needle) {
    if (needle.empty()) return true;
    if (haystack.size() < needle.size()) return false;
    auto lower = [](unsigned char c) { return char(std::tolower(c)); };
    for (std::size_t i = 0; i + needle.size() <= haystack.size(); ++i) {
        std::size_t j = 0;
        while (j < needle.size() &&
               lower(haystack[i + j]) == lower(needle[j]))
            ++j;
        if (j == needle.size()) return true;
    }
    return false;
}

// Balanced ${...} block starting at pos; returns one past the closing brace.
inline std::optional<std::size_t> placeholder_end(std::string_view s, std::size_t pos) {
    if (pos + 1 >= s.size() || s[pos] != '$' || s[pos + 1] != '{') return std::nullopt;
    int depth = 0;
    for (std::size_t i = pos; i < s.size(); ++i) {
        if (s[i] == '$' && i + 1 < s.size() && s[i + 1] == '{') {
            depth++;
            ++i;
        } else if (s[i] == '}') {
            if (--depth == 0) return i + 1;
        }
    }
    return std::nullopt;
}

}  // namespace detail

// Share of hex digits among non-separator characters (whitespace and colons
// are ignored). Zero when nothing remains to judge.
inline double hex_density(std::string_view text) {
    std::size_t counted = 0, hex = 0;
    for (unsigned char c : text) {
        if (detail::is_sep_ignored(c)) continue;
        ++counted;
        if (detail::is_hex_digit(c)) ++hex;
    }
    return counted == 0 ? 0.0 : double(hex) / double(counted);
}

struct HexRecovery {
    std::string bytes;
    bool loss = false;  // at least one unparseable pair was dropped
};

// Tolerant hex-stream conversion: separators stripped, then two characters
// at a time; a pair with a non-hex character is dropped.
inline HexRecovery hex_recover(std::string_view text) {
    std::string filtered;
    filtered.reserve(text.size());
    for (unsigned char c : text)
        if (!detail::is_sep_ignored(c)) filtered += char(c);

    HexRecovery out;
    std::size_t i = 0;
    for (; i + 1 < filtered.size(); i += 2) {
        int hi = detail::hex_value(filtered[i]);
        int lo = detail::hex_value(filtered[i + 1]);
        if (hi < 0 || lo < 0) {
            out.loss = true;
            continue;
        }
        out.bytes += char(hi << 4 | lo);
    }
    if (i < filtered.size()) out.loss = true;  // trailing odd character
    return out;
}

inline bool utf8_valid(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size()) {
        unsigned char c = s[i];
        std::size_t len;
        std::uint32_t cp;
        if (c < 0x80) {
            ++i;
            continue;
        } else if ((c & 0xE0) == 0xC0) {
            len = 2;
            cp = c & 0x1F;
        } else if ((c & 0xF0) == 0xE0) {
            len = 3;
            cp = c & 0x0F;
        } else if ((c & 0xF8) == 0xF0) {
            len = 4;
            cp = c & 0x07;
        } else {
            return false;
        }
        if (i + len > s.size()) return false;
        for (std::size_t k = 1; k < len; ++k) {
            if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return false;
            cp = cp << 6 | (static_cast<unsigned char>(s[i + k]) & 0x3F);
        }
        if (len == 2 && cp < 0x80) return false;
        if (len == 3 && cp < 0x800) return false;
        if (len == 4 && cp < 0x10000) return false;
        if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
        i += len;
    }
    return true;
}

// UTF-16 to UTF-8. Attempted only for even-length byte streams containing a
// NUL (ASCII-bearing UTF-16 always does; plain ASCII never does, which keeps
// garbage views out of the candidate set).
inline std::optional<std::string> utf16_to_utf8(std::string_view bytes, bool big_endian) {
    if (bytes.size() < 2 || bytes.size() % 2 != 0) return std::nullopt;
    if (bytes.find('\0') == std::string_view::npos) return std::nullopt;
    std::string out;
    out.reserve(bytes.size() / 2);
    for (std::size_t i = 0; i < bytes.size(); i += 2) {
        unsigned char b0 = bytes[i], b1 = bytes[i + 1];
        std::uint32_t unit = big_endian ? (std::uint32_t(b0) << 8 | b1)
                                        : (std::uint32_t(b1) << 8 | b0);
        if (unit >= 0xD800 && unit <= 0xDBFF) {
            if (i + 3 >= bytes.size()) return std::nullopt;
            unsigned char c0 = bytes[i + 2], c1 = bytes[i + 3];
            std::uint32_t low = big_endian ? (std::uint32_t(c0) << 8 | c1)
                                           : (std::uint32_t(c1) << 8 | c0);
            if (low < 0xDC00 || low > 0xDFFF) return std::nullopt;
            detail::encode_utf8(0x10000 + ((unit - 0xD800) << 10) + (low - 0xDC00), out);
            i += 2;
        } else if (unit >= 0xDC00 && unit <= 0xDFFF) {
            return std::nullopt;  // unpaired low surrogate
        } else {
            detail::encode_utf8(unit, out);
        }
    }
    return out;
}

// One percent-decoding pass. Malformed sequences stay verbatim; '+' is left
// alone so base64 runs survive.
inline std::pair<std::string, bool> percent_decode_pass(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool changed = false;
    for (std::size_t i = 0; i < text.size();) {
        if (text[i] == '%' && i + 2 < text.size() &&
            detail::is_hex_digit(text[i + 1]) && detail::is_hex_digit(text[i + 2])) {
            out += char(detail::hex_value(text[i + 1]) << 4 |
                        detail::hex_value(text[i + 2]));
            i += 3;
            changed = true;
        } else {
            out += text[i];
            ++i;
        }
    }
    return {std::move(out), changed};
}

// One HTML entity resolution pass: &#NN; &#xHH; and the named entities that
// show up disguising expression delimiters.
inline std::pair<std::string, bool> html_entity_pass(std::string_view text) {
    static const std::pair<std::string_view, char> named[] = {
        {"amp", '&'},   {"lt", '<'},     {"gt", '>'},    {"quot", '"'},
        {"apos", '\''}, {"dollar", '$'}, {"lcub", '{'},  {"lbrace", '{'},
        {"rcub", '}'},  {"rbrace", '}'}, {"colon", ':'}, {"sol", '/'},
        {"num", '#'},   {"percnt", '%'}, {"period", '.'},
    };
    std::string out;
    out.reserve(text.size());
    bool changed = false;
    for (std::size_t i = 0; i < text.size();) {
        if (text[i] != '&') {
            out += text[i++];
            continue;
        }
        std::size_t semi = text.find(';', i + 1);
        if (semi == std::string_view::npos || semi - i > 12) {
            out += text[i++];
            continue;
        }
        std::string_view body = text.substr(i + 1, semi - i - 1);
        bool resolved = false;
        if (body.size() >= 2 && body[0] == '#') {
            std::uint32_t cp = 0;
            bool ok = false;
            if (body[1] == 'x' || body[1] == 'X') {
                for (std::size_t k = 2; k < body.size(); ++k) {
                    int v = detail::hex_value(body[k]);
                    if (v < 0) { ok = false; break; }
                    cp = cp * 16 + std::uint32_t(v);
                    ok = true;
                }
            } else {
                for (std::size_t k = 1; k < body.size(); ++k) {
                    if (!std::isdigit(static_cast<unsigned char>(body[k]))) { ok = false; break; }
                    cp = cp * 10 + std::uint32_t(body[k] - '0');
                    ok = true;
                }
            }
            if (ok && cp <= 0x10FFFF && !(cp >= 0xD800 && cp <= 0xDFFF)) {
                detail::encode_utf8(cp, out);
                resolved = true;
            }
        } else {
            for (const auto& [name, ch] : named) {
                if (body == name) {
                    out += ch;
                    resolved = true;
                    break;
                }
            }
        }
        if (resolved) {
            i = semi + 1;
            changed = true;
        } else {
            out += text[i++];
        }
    }
    return {std::move(out), changed};
}

// One escape expansion pass: \uXXXX becomes the UTF-8 encoding of the code
// point, \xNN the raw byte. Malformed escapes stay verbatim.
inline std::pair<std::string, bool> escape_pass(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool changed = false;
    for (std::size_t i = 0; i < text.size();) {
        if (text[i] == '\\' && i + 5 < text.size() && text[i + 1] == 'u' &&
            detail::is_hex_digit(text[i + 2]) && detail::is_hex_digit(text[i + 3]) &&
            detail::is_hex_digit(text[i + 4]) && detail::is_hex_digit(text[i + 5])) {
            std::uint32_t cp = std::uint32_t(detail::hex_value(text[i + 2]) << 12 |
                                             detail::hex_value(text[i + 3]) << 8 |
                                             detail::hex_value(text[i + 4]) << 4 |
                                             detail::hex_value(text[i + 5]));
            detail::encode_utf8(cp, out);
            i += 6;
            changed = true;
        } else if (text[i] == '\\' && i + 3 < text.size() && text[i + 1] == 'x' &&
                   detail::is_hex_digit(text[i + 2]) && detail::is_hex_digit(text[i + 3])) {
            out += char(detail::hex_value(text[i + 2]) << 4 | detail::hex_value(text[i + 3]));
            i += 4;
            changed = true;
        } else {
            out += text[i++];
        }
    }
    return {std::move(out), changed};
}

// Collapses Log4j lookup obfuscation:
//   1. ${prefix:-literal}  ->  literal            (innermost first, to fixpoint)
//   2. ${name} placeholders (and stray placeholder punctuation) splitting the
//      letters j,n,d,i are dropped and the fragments joined.
// Unbalanced braces are left as-is.
inline std::pair<std::string, bool> normalize_obfuscation_steps(std::string text,
                                                                int max_iters) {
    bool changed_any = false;

    auto rewrite_default = [&](std::string& s) -> bool {
        std::vector<std::size_t> stack;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] == '$' && i + 1 < s.size() && s[i + 1] == '{') {
                stack.push_back(i);
                ++i;
            } else if (s[i] == '}' && !stack.empty()) {
                std::size_t start = stack.back();
                stack.pop_back();
                std::string body = s.substr(start + 2, i - start - 2);
                std::size_t p = body.find(":-");
                if (p != std::string::npos) {
                    s.replace(start, i - start + 1, body.substr(p + 2));
                    return true;
                }
            }
        }
        return false;
    };

    // Backtracking match of j->n->d->i from position i, where separators are
    // balanced ${...} groups or placeholder punctuation ($ { } :). Returns
    // one past the final letter, or npos.
    auto collapse_span = [&](const std::string& s, std::size_t i,
                             std::string& letters) -> std::size_t {
        static constexpr std::string_view seq = "jndi";
        std::set<std::pair<std::size_t, std::size_t>> visited;
        std::string best;
        std::size_t best_end = std::string::npos;

        // Depth-first over (position, next letter); first full match wins.
        std::vector<std::tuple<std::size_t, std::size_t, bool, std::string>> stack{
            {i, 0, false, ""}};
        while (!stack.empty()) {
            auto [pos, letter, seps, acc] = stack.back();
            stack.pop_back();
            if (letter == seq.size()) {
                if (seps) {
                    best = acc;
                    best_end = pos;
                    break;
                }
                continue;
            }
            if (!visited.emplace(pos, letter).second) continue;
            if (pos >= s.size()) continue;
            char c = s[pos];
            // Options pushed in reverse priority: prefer consuming the letter.
            if (c == '$' || c == '{' || c == '}' || c == ':')
                stack.emplace_back(pos + 1, letter, letter > 0 ? true : seps, acc);
            if (c == '$') {
                if (auto end = detail::placeholder_end(s, pos))
                    stack.emplace_back(*end, letter, letter > 0 ? true : seps, acc);
            }
            if (std::tolower(static_cast<unsigned char>(c)) == seq[letter])
                stack.emplace_back(pos + 1, letter + 1, seps, acc + c);
        }
        if (best_end == std::string::npos) return std::string::npos;
        letters = best;
        return best_end;
    };

    auto collapse_jndi = [&](std::string& s) -> bool {
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (std::tolower(static_cast<unsigned char>(s[i])) != 'j') continue;
            std::string letters;
            std::size_t end = collapse_span(s, i, letters);
            if (end != std::string::npos && end - i > letters.size()) {
                s.replace(i, end - i, letters);
                return true;
            }
        }
        return false;
    };

    for (int iter = 0; iter < max_iters; ++iter) {
        if (rewrite_default(text)) {
            changed_any = true;
            continue;
        }
        if (collapse_jndi(text)) {
            changed_any = true;
            continue;
        }
        break;
    }
    return {std::move(text), changed_any};
}

inline std::string normalize_obfuscation(std::string_view text, int max_iters = 16) {
    return normalize_obfuscation_steps(std::string(text), max_iters).first;
}

// Strict base64 decode: length divisible by four, padding only at the end.
inline std::optional<std::string> base64_decode_strict(std::string_view in) {
    if (in.empty() || in.size() % 4 != 0) return std::nullopt;
    static constexpr auto table = [] {
        std::array<std::int8_t, 256> t{};
        t.fill(-1);
        const char* alphabet =
            "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
        for (int i = 0; i < 64; ++i) t[std::size_t(alphabet[i])] = std::int8_t(i);
        return t;
    }();
    std::size_t pad = 0;
    while (pad < 2 && pad < in.size() && in[in.size() - 1 - pad] == '=') ++pad;
    std::string out;
    out.reserve(in.size() / 4 * 3);
    std::uint32_t acc = 0;
    int bits = 0;
    for (std::size_t i = 0; i < in.size() - pad; ++i) {
        std::int8_t v = table[static_cast<unsigned char>(in[i])];
        if (v < 0) return std::nullopt;
        acc = acc << 6 | std::uint32_t(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out += char((acc >> bits) & 0xFF);
        }
    }
    if (pad == 1 && out.empty()) return std::nullopt;
    return out;
}

// Candidate base64 substrings: maximal alphabet runs of at least min_run
// characters, plus the suffix after each '/' inside a run (exploit paths
// like Command/Base64/<blob> put the blob after a slash).
inline std::vector<std::string> base64_run_candidates(std::string_view text,
                                                      std::size_t min_run) {
    auto in_alphabet = [](unsigned char c) {
        return std::isalnum(c) || c == '+' || c == '/' || c == '=';
    };
    auto valid_shape = [](std::string_view run) {
        if (run.size() % 4 != 0) return false;
        std::size_t pad = 0;
        while (pad < run.size() && run[run.size() - 1 - pad] == '=') ++pad;
        if (pad > 2) return false;
        return run.find('=') == std::string_view::npos ||
               run.find('=') >= run.size() - pad;
    };

    std::vector<std::string> out;
    std::set<std::string> seen;
    std::size_t i = 0;
    while (i < text.size()) {
        if (!in_alphabet(text[i])) {
            ++i;
            continue;
        }
        std::size_t start = i;
        while (i < text.size() && in_alphabet(text[i])) ++i;
        std::string_view run = text.substr(start, i - start);
        if (run.size() < min_run) continue;

        std::vector<std::string_view> tries{run};
        for (std::size_t p = run.find('/'); p != std::string_view::npos;
             p = run.find('/', p + 1))
            tries.push_back(run.substr(p + 1));
        for (auto t : tries) {
            if (t.size() >= min_run && valid_shape(t) && seen.emplace(t).second)
                out.emplace_back(t);
        }
    }
    return out;
}

inline bool looks_gzip(std::string_view bytes) {
    return bytes.size() >= 2 && static_cast<unsigned char>(bytes[0]) == 0x1F &&
           static_cast<unsigned char>(bytes[1]) == 0x8B;
}

inline bool looks_zlib(std::string_view bytes) {
    if (bytes.size() < 2) return false;
    unsigned char b0 = bytes[0], b1 = bytes[1];
    return (b0 & 0x0F) == 8 && (std::uint32_t(b0) * 256 + b1) % 31 == 0;
}

// Inflates gzip- or zlib-wrapped data, capped at max_out bytes.
inline std::optional<std::string> decompress(std::string_view bytes, bool gzip,
                                             std::size_t max_out) {
    z_stream strm{};
    if (inflateInit2(&strm, gzip ? 16 + MAX_WBITS : MAX_WBITS) != Z_OK)
        return std::nullopt;
    std::string out;
    char buf[16384];
    strm.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(bytes.data()));
    strm.avail_in = uInt(bytes.size());
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        strm.next_out = reinterpret_cast<Bytef*>(buf);
        strm.avail_out = sizeof(buf);
        rc = inflate(&strm, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&strm);
            return std::nullopt;
        }
        out.append(buf, sizeof(buf) - strm.avail_out);
        if (out.size() > max_out) {
            inflateEnd(&strm);
            return std::nullopt;
        }
        if (rc == Z_OK && strm.avail_in == 0 && strm.avail_out != 0) {
            inflateEnd(&strm);
            return std::nullopt;  // truncated stream
        }
    }
    inflateEnd(&strm);
    if (out.empty()) return std::nullopt;
    return out;
}

// True when the candidate carries a jndi token once lookup obfuscation is
// collapsed.
inline bool has_jndi_signal(std::string_view text, int placeholder_iterations = 16) {
    if (detail::contains_ci(text, "jndi")) return true;
    return detail::contains_ci(normalize_obfuscation(text, placeholder_iterations),
                               "jndi");
}

inline double score_candidate(const DecodeCandidate& cand, const DecodeConfig& cfg = {}) {
    double score = cand.printable_ratio;
    if (has_jndi_signal(cand.text, cfg.placeholder_iterations)) score += cfg.jndi_weight;
    if (detail::contains_ci(cand.text, "ldap://")) score += cfg.ldap_weight;
    return score;
}

namespace detail {

inline DecodeCandidate make_candidate(std::string text, std::vector<std::string> chain,
                                      bool loss = false) {
    DecodeCandidate c;
    c.printable_ratio = printable_ratio(text);
    c.text = std::move(text);
    c.transform_chain = std::move(chain);
    c.parse_loss = loss;
    return c;
}

inline std::vector<std::string> extend(std::vector<std::string> chain,
                                       std::initializer_list<const char*> tags) {
    for (const char* t : tags) chain.emplace_back(t);
    return chain;
}

}  // namespace detail

// Text views of a byte stream: hex-stream recovery when the input is dense
// enough in hex digits, then the charset ladder. Identity decodings (UTF-8,
// ASCII, Latin-1 over the same bytes) collapse into the untransformed view,
// so only transformative views are emitted.
inline std::vector<DecodeCandidate> recover_text(std::string_view raw,
                                                 const DecodeConfig& cfg = {}) {
    std::vector<DecodeCandidate> out;
    auto ladder = [&](std::string_view bytes, const std::vector<std::string>& chain,
                      bool loss) {
        if (auto t = utf16_to_utf8(bytes, false))
            out.push_back(detail::make_candidate(
                *t, detail::extend(chain, {transform::charset_utf16le}), loss));
        if (auto t = utf16_to_utf8(bytes, true))
            out.push_back(detail::make_candidate(
                *t, detail::extend(chain, {transform::charset_utf16be}), loss));
    };

    if (hex_density(raw) >= cfg.hex_min_density) {
        auto rec = hex_recover(raw);
        if (!rec.bytes.empty()) {
            auto cand = detail::make_candidate(rec.bytes, {transform::hex_recover},
                                               rec.loss);
            ladder(cand.text, cand.transform_chain, rec.loss);
            out.insert(out.begin(), std::move(cand));
        }
    } else {
        ladder(raw, {}, false);
    }
    return out;
}

// Iterative unwinding of percent, HTML entity, and escape encodings until a
// fixpoint or max_depth passes. Every distinct intermediate becomes a
// candidate.
inline std::vector<DecodeCandidate> expand_encodings(std::string_view text,
                                                     int max_depth,
                                                     const DecodeConfig& cfg = {}) {
    (void)cfg;
    std::vector<DecodeCandidate> out;
    std::string current(text);
    std::vector<std::string> chain;
    for (int depth = 0; depth < max_depth; ++depth) {
        bool changed = false;
        if (auto [t, c] = percent_decode_pass(current); c) {
            chain.push_back(transform::url);
            current = std::move(t);
            out.push_back(detail::make_candidate(current, chain));
            changed = true;
        }
        if (auto [t, c] = html_entity_pass(current); c) {
            chain.push_back(transform::html_entity);
            current = std::move(t);
            out.push_back(detail::make_candidate(current, chain));
            changed = true;
        }
        if (auto [t, c] = escape_pass(current); c) {
            chain.push_back(transform::escape);
            current = std::move(t);
            out.push_back(detail::make_candidate(current, chain));
            changed = true;
        }
        if (!changed) break;
    }
    return out;
}

// Base64 runs decoded, decompressed when gzip/zlib-wrapped. The caller
// (decode_payload) feeds results back through the full pipeline.
inline std::vector<DecodeCandidate> base64_and_decompress(std::string_view text,
                                                          const DecodeConfig& cfg = {}) {
    std::vector<DecodeCandidate> out;
    for (const auto& run : base64_run_candidates(text, cfg.base64_min_run)) {
        auto decoded = base64_decode_strict(run);
        if (!decoded) continue;
        if (looks_gzip(*decoded)) {
            if (auto plain = decompress(*decoded, true, cfg.max_inflate_bytes))
                out.push_back(detail::make_candidate(
                    *plain, {transform::base64, transform::gunzip}));
        } else if (looks_zlib(*decoded)) {
            if (auto plain = decompress(*decoded, false, cfg.max_inflate_bytes))
                out.push_back(detail::make_candidate(
                    *plain, {transform::base64, transform::inflate}));
        } else {
            out.push_back(detail::make_candidate(*decoded, {transform::base64}));
        }
    }
    return out;
}

// Deterministic multi-layer decode: breadth-first expansion of every
// candidate through hex/charset recovery, encoding expansion, lookup
// collapsing, base64 and decompression, bounded by max_depth transforms per
// chain. The best candidate maximizes score; ties prefer fewer transforms,
// then earlier generation.
inline DecodedPayload decode_payload(std::string_view raw, const DecodeConfig& cfg = {}) {
    DecodedPayload result;
    result.raw = std::string(raw);
    result.byte_length = raw.size();

    std::set<std::string, std::less<>> seen;
    std::vector<std::size_t> queue;

    auto try_add = [&](DecodeCandidate cand) {
        if (cand.text.empty()) return;
        if (cand.transform_chain.size() > std::size_t(cfg.max_depth)) return;
        if (result.candidates.size() >= cfg.max_candidates) return;
        if (!seen.emplace(cand.text).second) return;
        queue.push_back(result.candidates.size());
        result.candidates.push_back(std::move(cand));
    };

    // The zero-transform view is always candidate 0, even when raw is empty.
    seen.emplace(result.raw);
    queue.push_back(0);
    result.candidates.push_back(detail::make_candidate(result.raw, {}));

    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
        // Copy: try_add may reallocate the candidate vector.
        const DecodeCandidate cand = result.candidates[queue[qi]];
        const auto& chain = cand.transform_chain;

        for (auto& next : recover_text(cand.text, cfg)) {
            next.transform_chain.insert(next.transform_chain.begin(), chain.begin(),
                                        chain.end());
            next.parse_loss = next.parse_loss || cand.parse_loss;
            try_add(std::move(next));
        }
        if (auto [t, c] = percent_decode_pass(cand.text); c)
            try_add(detail::make_candidate(
                std::move(t), detail::extend(chain, {transform::url}), cand.parse_loss));
        if (auto [t, c] = html_entity_pass(cand.text); c)
            try_add(detail::make_candidate(
                std::move(t), detail::extend(chain, {transform::html_entity}),
                cand.parse_loss));
        if (auto [t, c] = escape_pass(cand.text); c)
            try_add(detail::make_candidate(
                std::move(t), detail::extend(chain, {transform::escape}),
                cand.parse_loss));
        if (auto [t, c] = normalize_obfuscation_steps(cand.text,
                                                      cfg.placeholder_iterations);
            c)
            try_add(detail::make_candidate(
                std::move(t), detail::extend(chain, {transform::placeholder_collapse}),
                cand.parse_loss));
        for (auto& next : base64_and_decompress(cand.text, cfg)) {
            next.transform_chain.insert(next.transform_chain.begin(), chain.begin(),
                                        chain.end());
            next.parse_loss = next.parse_loss || cand.parse_loss;
            try_add(std::move(next));
        }
        if (looks_gzip(cand.text)) {
            if (auto plain = decompress(cand.text, true, cfg.max_inflate_bytes))
                try_add(detail::make_candidate(
                    *plain, detail::extend(chain, {transform::gunzip}),
                    cand.parse_loss));
        } else if (looks_zlib(cand.text)) {
            if (auto plain = decompress(cand.text, false, cfg.max_inflate_bytes))
                try_add(detail::make_candidate(
                    *plain, detail::extend(chain, {transform::inflate}),
                    cand.parse_loss));
        }
    }

    for (auto& cand : result.candidates) cand.score = score_candidate(cand, cfg);
    result.best = 0;
    for (std::size_t i = 1; i < result.candidates.size(); ++i) {
        const auto& cur = result.candidates[i];
        const auto& top = result.candidates[result.best];
        if (cur.score > top.score ||
            (cur.score == top.score &&
             cur.transform_chain.size() < top.transform_chain.size()))
            result.best = i;
    }
    for (std::size_t i = 1; i < result.candidates.size(); ++i)
        if (result.candidates[i].printable_ratio >= cfg.valid_text_ratio)
            ++result.valid_transform_count;
    return result;
}

}  // namespace telesift
