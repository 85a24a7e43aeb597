/** App wiring: reviewer identity, keyboard listener, render loop, polling. */

import { Api } from "./api.js";
import { handleKey, strokeFromEvent } from "./keyboard.js";
import { renderDashboard, renderItem, renderModal, renderQueue } from "./render.js";
import { ReviewSession } from "./session.js";

const REVIEWER_KEY = "craqan.reviewer_id";

function reviewerId(): string {
  let id = localStorage.getItem(REVIEWER_KEY) ?? "";
  while (!id.trim()) {
    id = window.prompt("Reviewer id (stored locally):") ?? "";
  }
  localStorage.setItem(REVIEWER_KEY, id.trim());
  return id.trim();
}

async function start(): Promise<void> {
  const api = new Api("");
  const session = new ReviewSession(api, reviewerId());

  const queueRoot = document.getElementById("queue")!;
  const itemRoot = document.getElementById("item")!;
  const modalRoot = document.getElementById("modal")!;
  const dashboardRoot = document.getElementById("dashboard")!;

  session.onChange(() => {
    renderQueue(session, queueRoot);
    renderItem(session, itemRoot);
    renderModal(session, modalRoot);
    renderDashboard(session.stats, dashboardRoot);
  });

  document.addEventListener("keydown", (event) => {
    void handleKey(session, strokeFromEvent(event));
  });

  await session.loadQueue();
  await session.loadStats();

  // other reviewers work concurrently; keep the queue and dashboard fresh
  setInterval(() => {
    void session.loadQueue();
    void session.loadStats();
  }, 5000);
}

void start();
