#include <cstdio>
#include <exception>

#include <CLI11.hpp>

#include "commands.hpp"
#include "falcon/error.hpp"

// Exit codes: 0 success, 1 usage error, 2 data error.
int main(int argc, char** argv) {
  CLI::App app{"falcon: malware analysis over network captures and call graphs"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from an ini-style file ([subcommand] sections)");
  app.allow_config_extras(false);

  falcon::cli::register_capture_commands(app);
  falcon::cli::register_net_commands(app);
  falcon::cli::register_code_commands(app);
  falcon::cli::register_fusion_commands(app);
  falcon::cli::register_synth_command(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const falcon::error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
