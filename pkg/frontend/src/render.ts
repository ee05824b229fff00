/**
 * Pure rendering: review state in, HTML string out.
 *
 * The browser entry point assigns the result to a container's innerHTML and
 * wires clicks by data-action attributes, so everything interactive is
 * expressed as plain markup here and the module stays testable in node.
 */

import { headClip, visibleCards, type ReviewState } from "./state.js";

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function formatDuration(seconds: number | null): string {
  if (seconds === null) return "--:--";
  const whole = Math.round(seconds);
  const minutes = Math.floor(whole / 60);
  const rest = whole % 60;
  return `${minutes}:${String(rest).padStart(2, "0")}`;
}

/** Distribution of the current queue scores in a handful of fixed-width bins. */
export function scoreHistogram(state: ReviewState, binCount = 8): number[] {
  const bins = new Array<number>(binCount).fill(0);
  const entries = state.lastQueue?.entries ?? [];
  if (entries.length === 0) return bins;
  let low = Infinity;
  let high = -Infinity;
  for (const entry of entries) {
    low = Math.min(low, entry.score);
    high = Math.max(high, entry.score);
  }
  const span = high - low || 1;
  for (const entry of entries) {
    const at = Math.min(binCount - 1, Math.floor(((entry.score - low) / span) * binCount));
    bins[at] = (bins[at] ?? 0) + 1;
  }
  return bins;
}

function bannerHtml(state: ReviewState): string {
  if (!state.banner) return "";
  const retry =
    state.banner.retry === null
      ? ""
      : `<button data-action="retry-${state.banner.retry}">retry</button>`;
  return (
    `<div class="banner banner-${state.banner.kind}">` +
    `<span>${escapeHtml(state.banner.message)}</span>` +
    `${retry}<button data-action="dismiss">dismiss</button></div>`
  );
}

function playerHtml(state: ReviewState, mediaUrl: (clipId: string) => string): string {
  const head = headClip(state);
  if (head === null) {
    return `<section class="player"><p class="done">queue empty</p></section>`;
  }
  // Native media element; the service endpoint honors byte-range requests.
  return (
    `<section class="player">` +
    `<video class="media" controls preload="metadata" src="${escapeHtml(mediaUrl(head))}"></video>` +
    `<div class="verdict">` +
    `<button data-action="label-pos" data-clip-id="${escapeHtml(head)}">positive</button>` +
    `<button data-action="label-neg" data-clip-id="${escapeHtml(head)}">negative</button>` +
    `</div></section>`
  );
}

function metricsHtml(state: ReviewState): string {
  const info = state.info;
  if (!info) return `<aside class="metrics"></aside>`;
  const counts = scoreHistogram(state);
  const tallest = Math.max(1, ...counts);
  const bars = counts
    .map(
      (count) =>
        `<span class="bar" data-count="${count}" style="height:${Math.round((count / tallest) * 100)}%"></span>`,
    )
    .join("");
  return (
    `<aside class="metrics">` +
    `<dl>` +
    `<dt>labeled</dt><dd class="labeled-count">${info.labeledCount} / ${info.clipCount}</dd>` +
    `<dt>balance</dt><dd class="class-balance">${info.positiveCount}+ / ${info.negativeCount}-</dd>` +
    `<dt>model</dt><dd class="model-status">${escapeHtml(info.modelStatus)}</dd>` +
    `</dl>` +
    `<div class="score-histogram">${bars}</div>` +
    `</aside>`
  );
}

function queueHtml(state: ReviewState): string {
  const items = visibleCards(state)
    .map(
      (card) =>
        `<li class="card" data-clip-id="${escapeHtml(card.clipId)}">` +
        `<div class="thumb" aria-hidden="true"></div>` +
        `<span class="clip-id">${escapeHtml(card.clipId)}</span>` +
        `<span class="score">${card.score.toFixed(3)}</span>` +
        `<span class="duration">${formatDuration(card.durationSec)}</span>` +
        `</li>`,
    )
    .join("");
  return `<ol class="queue">${items}</ol>`;
}

/** Render the whole review screen. mediaUrl maps a clip id to its media URL. */
export function renderHtml(state: ReviewState, mediaUrl: (clipId: string) => string): string {
  return (
    `<div class="review">` +
    bannerHtml(state) +
    playerHtml(state, mediaUrl) +
    queueHtml(state) +
    metricsHtml(state) +
    `</div>`
  );
}

/** Clip ids in the order the queue markup presents them. */
export function renderedOrder(html: string): string[] {
  const order: string[] = [];
  const pattern = /<li class="card" data-clip-id="([^"]+)"/g;
  for (const match of html.matchAll(pattern)) {
    order.push(match[1]!);
  }
  return order;
}
