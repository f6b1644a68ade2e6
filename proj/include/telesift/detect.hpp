#pragma once

#include <array>
#include <cctype>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "telesift/decode.hpp"
#include "telesift/geo.hpp"

namespace telesift {

// Schemes the tier-1 signature recognizes, with their default ports.
inline constexpr std::array<std::pair<std::string_view, int>, 7> known_schemes{{
    {"ldap", 389},
    {"ldaps", 636},
    {"rmi", 1099},
    {"dns", 53},
    {"iiop", 535},
    {"http", 80},
    {"https", 443},
}};

inline std::optional<int> scheme_default_port(std::string_view scheme) {
    for (const auto& [name, port] : known_schemes)
        if (name == scheme) return port;
    return std::nullopt;
}

struct JndiExpression {
    std::string scheme;         // lowercase; empty when outside the known set
    std::string endpoint_text;  // raw URI substring, scheme included
    std::string normalized;     // ${jndi:scheme://...} when reconstructable

    bool scheme_complete() const { return !scheme.empty(); }
    auto operator<=>(const JndiExpression&) const = default;
};

struct CallbackEndpoint {
    std::string host;
    bool is_ip_literal = false;
    int port = 0;
    std::string path;  // without the leading slash
    std::string scheme;

    auto operator<=>(const CallbackEndpoint&) const = default;
};

enum class Severity { L1, L2, L3, L4, L5 };

inline std::string_view severity_name(Severity s) {
    switch (s) {
    case Severity::L1: return "L1";
    case Severity::L2: return "L2";
    case Severity::L3: return "L3";
    case Severity::L4: return "L4";
    case Severity::L5: return "L5";
    }
    return "L5";
}

inline std::optional<Severity> severity_from_name(std::string_view name) {
    if (name == "L1") return Severity::L1;
    if (name == "L2") return Severity::L2;
    if (name == "L3") return Severity::L3;
    if (name == "L4") return Severity::L4;
    if (name == "L5") return Severity::L5;
    return std::nullopt;
}

struct DetectionResult {
    std::vector<JndiExpression> expressions;
    std::vector<CallbackEndpoint> endpoints;
    std::vector<std::string> endpoint_errors;  // unparseable endpoint texts
    bool obfuscated = false;
    bool weak_only = false;   // only generic ldap:// URIs matched
    bool tier2_match = false; // fragmented j-n-d-i signature fired
    int matched_candidate = 0;
    double printable_ratio = 0.0;
    int valid_transform_count = 0;
    std::size_t byte_length = 0;
    Severity severity = Severity::L5;
};

namespace detail {

struct CandidateMatch {
    std::vector<JndiExpression> expressions;
    std::vector<std::string> weak_uris;  // ldap:// URIs outside jndi expressions
    bool tier1 = false;                  // scheme-complete jndi expression
    bool tier1_any = false;              // any ${jndi:...} construct
    bool tier2 = false;
};

inline bool ci_equal(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::tolower(static_cast<unsigned char>(a[i])) !=
            std::tolower(static_cast<unsigned char>(b[i])))
            return false;
    return true;
}

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = char(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

// Tier-1: ${jndi:scheme://...}, case-insensitive, tolerant of interior
// whitespace and of a truncated closing brace. Returns expressions plus the
// spans they occupy so weak ldap:// hits can be separated.
inline void scan_tier1(std::string_view text, CandidateMatch& match,
                       std::vector<std::pair<std::size_t, std::size_t>>& spans) {
    for (std::size_t i = 0; i + 1 < text.size(); ++i) {
        if (text[i] != '$' || text[i + 1] != '{') continue;
        std::size_t p = i + 2;
        while (p < text.size() && std::isspace(static_cast<unsigned char>(text[p]))) ++p;
        if (p + 4 > text.size() || !ci_equal(text.substr(p, 4), "jndi")) continue;
        p += 4;
        while (p < text.size() && std::isspace(static_cast<unsigned char>(text[p]))) ++p;
        if (p >= text.size() || text[p] != ':') continue;
        ++p;
        while (p < text.size() && std::isspace(static_cast<unsigned char>(text[p]))) ++p;
        std::size_t scheme_start = p;
        while (p < text.size() &&
               (std::isalnum(static_cast<unsigned char>(text[p])) || text[p] == '+' ||
                text[p] == '.' || text[p] == '-'))
            ++p;
        if (p == scheme_start) continue;
        std::string scheme = to_lower(text.substr(scheme_start, p - scheme_start));
        if (p + 3 > text.size() || text.substr(p, 3) != "://") continue;
        std::size_t uri_start = scheme_start;
        p += 3;
        while (p < text.size() && text[p] != '}' &&
               !std::isspace(static_cast<unsigned char>(text[p])) && text[p] != '"' &&
               text[p] != '\'')
            ++p;
        std::size_t uri_end = p;
        std::size_t span_end = (p < text.size() && text[p] == '}') ? p + 1 : p;

        JndiExpression expr;
        expr.endpoint_text = std::string(text.substr(uri_start, uri_end - uri_start));
        std::string rest(text.substr(uri_start + scheme.size() + 3,
                                     uri_end - uri_start - scheme.size() - 3));
        if (scheme_default_port(scheme)) {
            expr.scheme = scheme;
            expr.normalized = "${jndi:" + scheme + "://" + rest + "}";
            match.tier1 = true;
        }
        match.tier1_any = true;
        match.expressions.push_back(std::move(expr));
        spans.emplace_back(i, span_end);
        i = span_end - 1;
    }
}

// Tier-2: the letters j,n,d,i separated by punctuation, whitespace, or
// ${...} placeholder expressions, with at least one separator. Small
// backtracking matcher; placeholder groups and their raw punctuation are
// both acceptable separators so fragments like j${k8}n${::d}i match.
inline bool scan_tier2(std::string_view text) {
    static constexpr std::string_view seq = "jndi";
    for (std::size_t start = 0; start < text.size(); ++start) {
        if (std::tolower(static_cast<unsigned char>(text[start])) != 'j') continue;
        std::set<std::pair<std::size_t, std::size_t>> visited;
        std::vector<std::tuple<std::size_t, std::size_t, bool>> stack{{start, 0, false}};
        while (!stack.empty()) {
            auto [pos, letter, seps] = stack.back();
            stack.pop_back();
            if (letter == seq.size()) {
                if (seps) return true;
                continue;
            }
            if (pos >= text.size()) continue;
            if (!visited.emplace(pos, letter).second) continue;
            unsigned char c = text[pos];
            if (letter > 0 &&
                (std::ispunct(c) || std::isspace(c)))
                stack.emplace_back(pos + 1, letter, true);
            if (letter > 0 && c == '$') {
                if (auto end = telesift::detail::placeholder_end(text, pos))
                    stack.emplace_back(*end, letter, true);
            }
            if (std::tolower(c) == seq[letter])
                stack.emplace_back(pos + 1, letter + 1, seps);
        }
    }
    return false;
}

// Tier-3: generic ldap:// URIs outside tier-1 expression spans.
inline void scan_tier3(std::string_view text, CandidateMatch& match,
                       const std::vector<std::pair<std::size_t, std::size_t>>& spans) {
    const std::string lowered = to_lower(text);
    for (std::size_t pos = lowered.find("ldap://"); pos != std::string::npos;
         pos = lowered.find("ldap://", pos + 1)) {
        bool inside = false;
        for (auto [lo, hi] : spans)
            if (pos >= lo && pos < hi) {
                inside = true;
                break;
            }
        if (inside) continue;
        std::size_t end = pos;
        while (end < text.size() && text[end] != '}' && text[end] != '"' &&
               text[end] != '\'' && text[end] != '<' && text[end] != '>' &&
               !std::isspace(static_cast<unsigned char>(text[end])))
            ++end;
        match.weak_uris.emplace_back(text.substr(pos, end - pos));
    }
}

inline CandidateMatch match_candidate(std::string_view text) {
    CandidateMatch match;
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    scan_tier1(text, match, spans);
    match.tier2 = scan_tier2(text);
    scan_tier3(text, match, spans);
    return match;
}

// Transforms that conceal content from literal signatures. A single URL
// decode is everyday HTTP, two or more is deliberate layering.
inline bool chain_obfuscates(const std::vector<std::string>& chain) {
    int url_layers = 0;
    for (const auto& tag : chain) {
        if (tag == transform::url) {
            ++url_layers;
            continue;
        }
        if (tag == transform::placeholder_collapse || tag == transform::escape ||
            tag == transform::html_entity || tag == transform::hex_recover ||
            tag == transform::base64 || tag == transform::gunzip ||
            tag == transform::inflate)
            return true;
    }
    return url_layers >= 2;
}

}  // namespace detail

struct SignatureMatches {
    std::vector<JndiExpression> expressions;  // deduplicated, discovery order
    std::vector<std::string> weak_uris;
    bool obfuscated = false;
    bool tier2 = false;
    int first_tier1_candidate = -1;
    int first_any_candidate = -1;
};

// Runs the hierarchical signature set over every decode candidate and
// aggregates the indicators.
inline SignatureMatches match_signatures(const DecodedPayload& decoded) {
    SignatureMatches agg;
    std::set<JndiExpression> seen_exprs;
    std::set<std::string> seen_weak;
    for (std::size_t i = 0; i < decoded.candidates.size(); ++i) {
        const auto& cand = decoded.candidates[i];
        auto match = detail::match_candidate(cand.text);
        bool any = match.tier1_any || match.tier2 || !match.weak_uris.empty();
        if (match.tier1_any && agg.first_tier1_candidate < 0)
            agg.first_tier1_candidate = int(i);
        if (any && agg.first_any_candidate < 0) agg.first_any_candidate = int(i);
        if (match.tier2) {
            agg.tier2 = true;
            agg.obfuscated = true;
        }
        // A jndi construct only reachable through concealing transforms is
        // obfuscated even when the collapsed form is canonical.
        if (match.tier1_any && agg.first_tier1_candidate == int(i) &&
            detail::chain_obfuscates(cand.transform_chain))
            agg.obfuscated = true;
        for (auto& expr : match.expressions)
            if (seen_exprs.insert(expr).second) agg.expressions.push_back(expr);
        for (auto& uri : match.weak_uris)
            if (seen_weak.insert(uri).second) agg.weak_uris.push_back(uri);
    }
    return agg;
}

// Splits a scheme-complete expression's URI into host, port, and path.
// Missing ports take the scheme default.
inline std::optional<CallbackEndpoint> extract_callback(const JndiExpression& expr) {
    if (!expr.scheme_complete()) return std::nullopt;
    std::string_view uri = expr.endpoint_text;
    std::size_t authority = uri.find("://");
    if (authority == std::string_view::npos) return std::nullopt;
    std::string_view rest = uri.substr(authority + 3);

    CallbackEndpoint ep;
    ep.scheme = expr.scheme;
    std::size_t slash = rest.find('/');
    std::string_view hostport =
        slash == std::string_view::npos ? rest : rest.substr(0, slash);
    if (slash != std::string_view::npos) ep.path = std::string(rest.substr(slash + 1));

    std::size_t colon = hostport.rfind(':');
    if (colon != std::string_view::npos) {
        std::string_view port_text = hostport.substr(colon + 1);
        if (port_text.empty()) return std::nullopt;
        int port = 0;
        for (char c : port_text) {
            if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
            port = port * 10 + (c - '0');
            if (port > 65535) return std::nullopt;
        }
        ep.port = port;
        ep.host = std::string(hostport.substr(0, colon));
    } else {
        ep.host = std::string(hostport);
        ep.port = scheme_default_port(expr.scheme).value_or(0);
    }
    if (ep.host.empty()) return std::nullopt;
    ep.is_ip_literal = parse_ipv4(ep.host).has_value();
    return ep;
}

// Emits a DetectionResult when any signature tier matched; severity is left
// at the default and assigned by classify_severity.
inline std::optional<DetectionResult> detect_payload(const DecodedPayload& decoded) {
    auto matches = match_signatures(decoded);
    bool tier1_any = matches.first_tier1_candidate >= 0;
    bool any = tier1_any || matches.tier2 || !matches.weak_uris.empty();
    if (!any) return std::nullopt;

    DetectionResult result;
    result.expressions = std::move(matches.expressions);
    result.obfuscated = matches.obfuscated;
    result.tier2_match = matches.tier2;
    result.weak_only = !tier1_any && !matches.tier2 && !matches.weak_uris.empty();

    for (const auto& expr : result.expressions) {
        if (!expr.scheme_complete()) continue;
        if (auto ep = extract_callback(expr))
            result.endpoints.push_back(std::move(*ep));
        else
            result.endpoint_errors.push_back(expr.endpoint_text);
    }
    // Weak ldap:// URIs still reference callback infrastructure; parse them
    // as ldap endpoints so infrastructure analytics can see them.
    for (const auto& uri : matches.weak_uris) {
        JndiExpression weak;
        weak.scheme = "ldap";
        weak.endpoint_text = uri;
        if (auto ep = extract_callback(weak)) {
            if (std::find(result.endpoints.begin(), result.endpoints.end(), *ep) ==
                result.endpoints.end())
                result.endpoints.push_back(std::move(*ep));
        } else {
            result.endpoint_errors.push_back(uri);
        }
    }

    result.matched_candidate = matches.first_tier1_candidate >= 0
                                   ? matches.first_tier1_candidate
                                   : matches.first_any_candidate;
    result.printable_ratio = decoded.best_candidate().printable_ratio;
    result.valid_transform_count = decoded.valid_transform_count;
    result.byte_length = decoded.byte_length;
    return result;
}

struct ClassifyConfig {
    // Substrings identifying out-of-band verification (OAST) callback hosts.
    std::vector<std::string> oast_hosts{"interact.sh", "dnslog.", "oast.",
                                        "burpcollaborator", "canarytokens"};
    // Dotted-quad of the monitored destination, for self-referencing
    // verification tokens embedded in callback paths.
    std::string telescope_address;
};

namespace detail {

inline bool l1_markers(const DecodedPayload& decoded) {
    static constexpr std::string_view commands[] = {"wget ", "curl ", "/bin/sh",
                                                    "chmod ", "powershell"};
    static constexpr std::string_view exec_paths[] = {"command/base64/", "/exploit",
                                                      "/basic/command"};
    for (const auto& cand : decoded.candidates) {
        for (auto marker : commands)
            if (contains_ci(cand.text, marker)) return true;
        for (auto marker : exec_paths)
            if (contains_ci(cand.text, marker)) return true;
    }
    return false;
}

}  // namespace detail

// Severity-ordered first-match classification:
//   L1 command execution / downloader markers anywhere in the decoded views
//   L2 callback verification via OAST hosts or self-referencing paths
//   L3 dns-scheme enumeration
//   L4 any other complete or fragmented jndi signal
//   L5 residual (weak-only and unknown-scheme payloads land here)
inline Severity classify_severity(const DetectionResult& result,
                                  const DecodedPayload& decoded,
                                  const ClassifyConfig& cfg = {}) {
    if (detail::l1_markers(decoded)) return Severity::L1;

    bool scheme_complete = false;
    for (const auto& expr : result.expressions)
        if (expr.scheme_complete()) scheme_complete = true;

    if (!result.weak_only && scheme_complete) {
        for (const auto& ep : result.endpoints) {
            for (const auto& marker : cfg.oast_hosts)
                if (detail::contains_ci(ep.host, marker)) return Severity::L2;
            if (!cfg.telescope_address.empty() &&
                ep.path.find(cfg.telescope_address) != std::string::npos)
                return Severity::L2;
        }
        for (const auto& expr : result.expressions)
            if (expr.scheme == "dns") return Severity::L3;
    }
    if (scheme_complete || result.tier2_match) return Severity::L4;
    return Severity::L5;
}

}  // namespace telesift
