#pragma once

#include "session.hpp"

#include <httplib.h>

namespace sweepscope {

/// HTTP front end over a run directory. The session is loaded on first use so
/// a run that is still being written answers 409 until its manifest completes.
class Service {
public:
    explicit Service(std::string dir) : dir_(std::move(dir)) { routes(); }

    httplib::Server& server() { return server_; }

    bool listen(const std::string& host, int port) { return server_.listen(host, port); }
    int bind_any_port(const std::string& host) { return server_.bind_to_any_port(host); }
    bool listen_after_bind() { return server_.listen_after_bind(); }
    void stop() { server_.stop(); }

    std::shared_ptr<RunSession> session()
    {
        std::lock_guard lock(mutex_);
        if (!session_)
            session_ = std::make_shared<RunSession>(load_run(dir_));
        return session_;
    }

private:
    static void send_json(httplib::Response& res, const Json& j, int status = 200)
    {
        res.status = status;
        res.set_content(j.dump(), "application/json");
    }

    template <class F>
    httplib::Server::Handler wrap(F f)
    {
        return [this, f](const httplib::Request& req, httplib::Response& res) {
            try {
                f(*session(), req, res);
            } catch (const RunInProgress& e) {
                send_json(res, {{"error", e.what()}}, 409);
            } catch (const NotFound& e) {
                send_json(res, {{"error", e.what()}}, 404);
            } catch (const InvalidThreshold& e) {
                send_json(res, {{"error", e.what()}}, 422);
            } catch (const InvalidArgument& e) {
                send_json(res, {{"error", e.what()}}, 422);
            } catch (const Json::exception& e) {
                send_json(res, {{"error", e.what()}}, 400);
            } catch (const std::exception& e) {
                send_json(res, {{"error", e.what()}}, 500);
            }
        };
    }

    static Json body_json(const httplib::Request& req)
    {
        try {
            return Json::parse(req.body);
        } catch (const Json::parse_error& e) {
            throw InvalidArgument(std::string("request body: ") + e.what());
        }
    }

    static std::string param(const httplib::Request& req, const char* name, std::string fallback = {})
    {
        return req.has_param(name) ? req.get_param_value(name) : fallback;
    }

    void routes()
    {
        using Req = const httplib::Request&;
        using Res = httplib::Response&;
        server_.Get("/run", wrap([](RunSession& s, Req, Res res) { send_json(res, s.run_json()); }));
        server_.Get(R"(/iterations/([^/]+))",
                    wrap([](RunSession& s, Req req, Res res) { send_json(res, s.iteration_json(req.matches[1])); }));
        server_.Get("/transitions", wrap([](RunSession& s, Req req, Res res) {
                        if (!req.has_param("from") || !req.has_param("to"))
                            throw InvalidArgument("from and to are required");
                        send_json(res, s.transitions_json(param(req, "from"), param(req, "to")));
                    }));
        server_.Get("/visible_pairs", wrap([](RunSession& s, Req, Res res) { send_json(res, s.visible_pairs_json()); }));
        server_.Get("/embedding", wrap([](RunSession& s, Req req, Res res) {
                        send_json(res, s.embedding(param(req, "method", "mds"), parse_color_mode(param(req, "color_mode", "by_item")),
                                                   param(req, "size", "group_size")));
                    }));
        server_.Get("/violins", wrap([](RunSession& s, Req req, Res res) {
                        send_json(res, s.violins_json(parse_violin_channel(param(req, "channel", "membership"))));
                    }));
        server_.Get("/archetypes", wrap([](RunSession& s, Req, Res res) { send_json(res, s.archetypes()); }));
        server_.Get("/archetypes/sweep", wrap([](RunSession& s, Req, Res res) { send_json(res, s.sweep_curve()); }));
        server_.Post("/archetypes/threshold", wrap([](RunSession& s, Req req, Res res) {
                         const auto j = body_json(req);
                         if (!j.contains("value") || !j["value"].is_number_integer())
                             throw InvalidThreshold("body needs an integer 'value'");
                         send_json(res, s.set_threshold(j["value"].get<int>()));
                     }));
        server_.Post("/visibility", wrap([](RunSession& s, Req req, Res res) {
                         const auto j = body_json(req);
                         send_json(res, s.set_visibility(j.at("keys").get<std::vector<std::string>>()));
                     }));
        server_.Post("/class", wrap([](RunSession& s, Req req, Res res) {
                         const auto j = body_json(req);
                         send_json(res, s.create_class(j.contains("spec") ? j["spec"] : j));
                     }));
        server_.Get(R"(/class/([^/]+)\.csv)", wrap([](RunSession& s, Req req, Res res) {
                        res.set_content(s.class_csv(req.matches[1]), "text/csv; charset=utf-8");
                    }));
        server_.Get("/wordclouds", wrap([](RunSession& s, Req req, Res res) {
                        const auto mode = param(req, "mode", "frequency");
                        const auto top = static_cast<std::size_t>(std::stoul(param(req, "top_n", "30")));
                        send_json(res, s.wordclouds(param(req, "class"), mode, param(req, "iteration"), param(req, "from"),
                                                    param(req, "to"), top));
                    }));
    }

    std::string dir_;
    httplib::Server server_;
    std::mutex mutex_;
    std::shared_ptr<RunSession> session_;
};

}  // namespace sweepscope
