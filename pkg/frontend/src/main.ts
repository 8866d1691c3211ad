import { ApiClient } from "./api.js";
import { ChatView } from "./chat.js";
import { DashboardView } from "./dashboard.js";
import { depthHistogram } from "./state.js";

const POLL_INTERVAL_MS = 5000;

function mustFind(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

export function bootstrap(): void {
  const api = new ApiClient("");
  const chatRoot = mustFind("chat-view");
  const dashboardRoot = mustFind("dashboard-view");

  const dashboard = new DashboardView(dashboardRoot, api);
  const chat = new ChatView(chatRoot, api, {
    onEvolution: (summary) => {
      dashboard.setLastEvolution(summary);
      void dashboard.refresh();
    },
    onTurnsChanged: () => dashboard.renderHistogram(),
  });
  dashboard.setHistogramSource(() => depthHistogram(chat.turns));
  void dashboard.refresh();

  // tab switching
  const tabs: Array<[string, string]> = [
    ["tab-chat", "chat-view"],
    ["tab-dashboard", "dashboard-view"],
  ];
  for (const [buttonId, viewId] of tabs) {
    mustFind(buttonId).addEventListener("click", () => {
      for (const [otherButton, otherView] of tabs) {
        mustFind(otherView).hidden = otherView !== viewId;
        mustFind(otherButton).classList.toggle("active", otherButton === buttonId);
      }
    });
  }
  mustFind("dashboard-view").hidden = true;

  // poll stats while the tab is visible
  setInterval(() => {
    if (document.visibilityState === "visible") {
      void dashboard.refresh();
    }
  }, POLL_INTERVAL_MS);
}

if (typeof document !== "undefined" && document.getElementById("chat-view")) {
  bootstrap();
}
