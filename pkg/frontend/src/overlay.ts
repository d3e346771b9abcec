import type { OverlayMarker } from "./viewmodel.js";

/** The slice of CanvasRenderingContext2D the overlay uses; tests stub it. */
export interface Canvas2DLike {
  clearRect(x: number, y: number, w: number, h: number): void;
  drawImage(image: unknown, dx: number, dy: number): void;
  beginPath(): void;
  arc(x: number, y: number, r: number, start: number, end: number): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
  fillText(text: string, x: number, y: number): void;
  strokeStyle: string | unknown;
  fillStyle: string | unknown;
  lineWidth: number;
  font: string;
}

export const MARKER_RADIUS = 6;
export const CROSSHAIR = 10;

/** Draw the camera frame (if decoded) and one labeled marker per object at
 * its exact pixel centroid. Canvas size must equal the image size, so
 * pixel coordinates map 1:1. */
export function drawOverlay(
  ctx: Canvas2DLike,
  image: unknown | null,
  width: number,
  height: number,
  markers: OverlayMarker[],
): void {
  ctx.clearRect(0, 0, width, height);
  if (image !== null) {
    ctx.drawImage(image, 0, 0);
  }
  ctx.lineWidth = 2;
  ctx.font = "12px system-ui, sans-serif";
  for (const marker of markers) {
    ctx.strokeStyle = "#ff3366";
    ctx.beginPath();
    ctx.arc(marker.u, marker.v, MARKER_RADIUS, 0, Math.PI * 2);
    ctx.stroke();
    ctx.beginPath();
    ctx.moveTo(marker.u - CROSSHAIR, marker.v);
    ctx.lineTo(marker.u + CROSSHAIR, marker.v);
    ctx.moveTo(marker.u, marker.v - CROSSHAIR);
    ctx.lineTo(marker.u, marker.v + CROSSHAIR);
    ctx.stroke();
    ctx.fillStyle = "#ff3366";
    ctx.fillText(marker.label, marker.u + MARKER_RADIUS + 2, marker.v - MARKER_RADIUS);
  }
}
