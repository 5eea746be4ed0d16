/** Page entry: #workspace for the conductor console, #survey for participants. */

import { ApiClient } from "./api.js";
import { SurveyController } from "./survey.js";
import { WorkspaceController } from "./workspace.js";

function param(name: string, fallback: string): string {
  const value = new URLSearchParams(window.location.search).get(name);
  return value ?? fallback;
}

async function boot(): Promise<void> {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app element");
  const api = new ApiClient(param("server", ""));
  const mode = window.location.hash.replace("#", "") || "workspace";
  if (mode === "survey") {
    await SurveyController.start(
      api,
      param("study", "curiosity-verification"),
      param("participant", `web-${Date.now()}`),
      root,
    );
  } else {
    await WorkspaceController.start(
      api,
      param("participant", `conductor-${Date.now()}`),
      root,
    );
  }
}

window.addEventListener("DOMContentLoaded", () => {
  void boot();
});
