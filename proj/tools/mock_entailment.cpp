// Deterministic stand-in for an entailment scorer: serves POST /score with a
// token-overlap F1. Prints the bound port as JSON on stdout, then blocks.

#include <iostream>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "vslan/mock_entailment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"mock entailment scorer"};
    int port = 0;
    app.add_option("--port", port, "port to listen on (0 picks a free port)");
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    httplib::Server server;
    vslan::mock::configure_server(server);
    if (port == 0) {
        port = server.bind_to_any_port("127.0.0.1");
        if (port <= 0) {
            std::cerr << "error: could not bind any port\n";
            return 2;
        }
    } else if (!server.bind_to_port("127.0.0.1", port)) {
        std::cerr << "error: could not bind port " << port << "\n";
        return 2;
    }
    std::cout << nlohmann::json{{"port", port}}.dump() << std::endl;
    std::cerr << "mock entailment scorer listening on 127.0.0.1:" << port << "\n";
    server.listen_after_bind();
    return 0;
}
