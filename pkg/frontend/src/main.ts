/** Browser entry point: mount the app on #app against ?base= or same origin. */

import { mount } from "./app.js";

const params = new URLSearchParams(window.location.search);
const base = params.get("base") ?? window.location.origin;
const root = document.getElementById("app");
if (root) mount(root, base);
