#include "dtwin/http_api.hpp"

#include <httplib.h>

#include <nlohmann/json.hpp>

#include "dtwin/service.hpp"

namespace dtwin {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message, const json& detail = {}) {
  json body = {{"error", message}};
  if (detail.is_object()) body.update(detail);
  send_json(res, status, body);
}

template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const ServiceError& e) {
      send_error(res, e.status(), e.what(), e.detail());
    } catch (const json::exception& e) {
      send_error(res, 400, std::string("malformed JSON: ") + e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  };
}

std::size_t parse_stride(const httplib::Request& req) {
  if (!req.has_param("stride")) return 1;
  const std::string s = req.get_param_value("stride");
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used != s.size() || v < 1) throw std::invalid_argument(s);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ServiceError(400, "stride must be a positive integer", {{"field", "stride"}});
  }
}

}  // namespace

std::unique_ptr<httplib::Server> make_http_server(Service& service, const std::filesystem::path& static_dir) {
  auto srv = std::make_unique<httplib::Server>();
  srv->set_default_headers({{"Access-Control-Allow-Origin", "*"}});

  srv->Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });

  srv->Get("/healthz", [](const httplib::Request&, httplib::Response& res) { send_json(res, 200, {{"ok", true}}); });

  srv->Post("/runs", guarded([&service](const httplib::Request& req, httplib::Response& res) {
    json body = req.body.empty() ? json::object() : json::parse(req.body);
    send_json(res, 201, service.submit(body).to_json());
  }));

  srv->Get("/runs", guarded([&service](const httplib::Request&, httplib::Response& res) {
    json runs = json::array();
    for (const RunDescriptor& d : service.list()) {
      json j = d.to_json();
      j.erase("config");
      runs.push_back(std::move(j));
    }
    send_json(res, 200, {{"runs", runs}});
  }));

  srv->Get("/runs/:id", guarded([&service](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, service.get(req.path_params.at("id")).to_json());
  }));

  srv->Get("/runs/:id/report", guarded([&service](const httplib::Request& req, httplib::Response& res) {
    res.status = 200;
    res.set_content(service.report_text(req.path_params.at("id")), "application/json");
  }));

  srv->Get("/runs/:id/series", guarded([&service](const httplib::Request& req, httplib::Response& res) {
    if (!req.has_param("metric")) throw ServiceError(400, "metric is required", {{"field", "metric"}});
    const std::string id = req.path_params.at("id");
    const std::string metric = req.get_param_value("metric");
    const std::size_t stride = parse_stride(req);
    TimeSeries ts = service.series(id, metric, stride);
    send_json(res, 200,
              {{"run_id", id}, {"metric", metric}, {"stride", stride}, {"time_s", ts.time_s}, {"values", ts.value}});
  }));

  srv->Get("/compare", guarded([&service](const httplib::Request& req, httplib::Response& res) {
    if (!req.has_param("a") || !req.has_param("b")) throw ServiceError(400, "a and b are required");
    send_json(res, 200, service.compare(req.get_param_value("a"), req.get_param_value("b")));
  }));

  srv->Delete("/runs/:id", guarded([&service](const httplib::Request& req, httplib::Response& res) {
    service.remove(req.path_params.at("id"));
    res.status = 204;
  }));

  if (!static_dir.empty() && std::filesystem::is_directory(static_dir)) {
    srv->set_mount_point("/", static_dir.string());
  }
  return srv;
}

}  // namespace dtwin
