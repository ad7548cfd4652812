import { startApp } from "./app.js";

window.addEventListener("load", () => {
  const canvas = document.getElementById("view") as HTMLCanvasElement;
  const status = document.getElementById("status") as HTMLElement;
  startApp(canvas, status);
});
