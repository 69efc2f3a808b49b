import { createApp } from "./app";
import "./style.css";

const root = document.getElementById("app");
if (root) {
  createApp(root);
}
