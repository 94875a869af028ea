// Entry point: mount the wizard against the engine service.

import { ApiClient } from "./api.js";
import { WizardView } from "./ui.js";
import { WizardController } from "./wizard.js";

const base = (window as unknown as { ENGINE_URL?: string }).ENGINE_URL ?? "";
const controller = new WizardController(new ApiClient(base));
const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app mount point");
}
new WizardView(root, controller);

// deep link: #session=<id> reconstructs the wizard purely from the server
const match = window.location.hash.match(/session=([0-9a-f]+)/);
if (match) {
  void controller.refresh(match[1]);
}
