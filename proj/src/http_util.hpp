#pragma once

#include <string>
#include <utility>

namespace tasr {

// Splits "http://host:port/some/prefix" into {"http://host:port", "/some/prefix"}.
// The prefix has no trailing slash and is empty when the URL has no path.
inline std::pair<std::string, std::string> split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (path_start == std::string::npos) return {url, ""};
    std::string prefix = url.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {url.substr(0, path_start), prefix};
}

}  // namespace tasr
