#pragma once

#include <filesystem>
#include <memory>
#include <string>

namespace httplib {
class Server;
}

namespace dtwin {

class Service;

/// Routes:
///   POST   /runs                         201 descriptor | 400 {error, field}
///   GET    /runs                         {runs: [...]}
///   GET    /runs/{id}                    descriptor | 404
///   GET    /runs/{id}/report             report.json | 404 | 409 unfinished
///   GET    /runs/{id}/series?metric=&stride=
///   GET    /compare?a=&b=
///   DELETE /runs/{id}                    204 | 404 | 409 active
///   GET    /healthz
/// `static_dir`, when it exists, is mounted at / for the dashboard build.
std::unique_ptr<httplib::Server> make_http_server(Service& service, const std::filesystem::path& static_dir = {});

}  // namespace dtwin
