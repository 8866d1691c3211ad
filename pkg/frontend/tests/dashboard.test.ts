import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { DashboardView } from "../src/dashboard.js";
import { serverBase } from "./server.js";

let root: HTMLElement;

beforeEach(() => {
  document.body.innerHTML = "";
  root = document.createElement("section");
  document.body.appendChild(root);
});

describe("dashboard against the mock-backed engine", () => {
  it("renders exactly the numbers from the stats payload", async () => {
    const api = new ApiClient(serverBase());
    const dashboard = new DashboardView(root, api);
    await dashboard.refresh();
    const stats = dashboard.lastStats!;
    expect(root.querySelector(".stat-triples")?.textContent).toBe(String(stats.triple_count));
    expect(root.querySelector(".stat-entities")?.textContent).toBe(String(stats.entity_count));
    expect(root.querySelector(".stat-relations")?.textContent).toBe(String(stats.relation_count));
    expect(root.querySelector(".kg-size-chart .chart-final-label")?.textContent).toBe(
      String(stats.size_series[stats.size_series.length - 1]),
    );
  });

  it("shows an empty depth histogram before any questions", async () => {
    const api = new ApiClient(serverBase());
    const dashboard = new DashboardView(root, api);
    await dashboard.refresh();
    expect(root.querySelector(".depth-chart .chart-empty")).not.toBeNull();
  });

  it("renders the session depth histogram from the provided source", async () => {
    const api = new ApiClient(serverBase());
    const dashboard = new DashboardView(root, api);
    dashboard.setHistogramSource(() => new Map([[1, 4], [2, 1]]));
    await dashboard.refresh();
    const labels = [...root.querySelectorAll(".depth-chart .bar-label")].map(
      (n) => n.textContent,
    );
    expect(labels).toEqual(["depth 1: 4", "depth 2: 1"]);
    expect(root.querySelector(".depth-chart .bar-total-label")?.textContent).toBe("total 5");
  });

  it("renders the last evolution summary on demand", async () => {
    const api = new ApiClient(serverBase());
    const dashboard = new DashboardView(root, api);
    dashboard.setLastEvolution({
      question_id: "q",
      candidates: 3,
      added: 1,
      added_triples: [{ head: "a", relation: "r", tail: "b" }],
      skipped_exact: 1,
      skipped_similar: 1,
    });
    expect(root.querySelector(".evolution-summary")?.textContent).toContain("added 1");
    expect(root.querySelector(".evolution-triple")?.textContent).toBe("a | r | b");
  });
});
